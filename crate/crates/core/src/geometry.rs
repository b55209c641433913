//! Small dense 2-vectors and 2x2 matrices, distance to SO(2), planar Procrustes
//! and triangle areas.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn from_f64(v: [f64; 2]) -> Self {
        Self::new(T::lit(v[0]), T::lit(v[1]))
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the planar cross product.
    #[inline]
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> AddAssign for Vec2<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x = self.x + o.x;
        self.y = self.y + o.y;
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Scalar> Mul<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

/// Row-major 2x2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Scalar> Mat2<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { a, b, c, d }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn scaled_identity(s: T) -> Self {
        Self::new(s, T::zero(), T::zero(), s)
    }

    pub fn diag(x: T, y: T) -> Self {
        Self::new(x, T::zero(), T::zero(), y)
    }

    pub fn rotation(theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, -s, s, c)
    }

    /// Matrix whose columns are `u` and `v`.
    pub fn from_columns(u: Vec2<T>, v: Vec2<T>) -> Self {
        Self::new(u.x, v.x, u.y, v.y)
    }

    #[inline]
    pub fn det(&self) -> T {
        self.a * self.d - self.b * self.c
    }

    #[inline]
    pub fn trace(&self) -> T {
        self.a + self.d
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    #[inline]
    pub fn frobenius_sq(&self) -> T {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    pub fn frobenius(&self) -> T {
        self.frobenius_sq().sqrt()
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        Some(Self::new(self.d / det, -self.b / det, -self.c / det, self.a / det))
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    /// Singular values `(sigma_1, s_2)` with `sigma_1 >= |s_2|` and `s_2` carrying the sign
    /// of the determinant.
    pub fn signed_singular_values(&self) -> (T, T) {
        let (q, r) = self.conformal_split();
        (q + r, q - r)
    }

    /// Norms of the conformal and anticonformal parts: `M = q * R(phi) + r * S(psi)`
    /// with `R` a rotation and `S` a reflection, scaled so that `sigma = q +- r`.
    fn conformal_split(&self) -> (T, T) {
        let half = T::lit(0.5);
        let e = (self.a + self.d) * half;
        let f = (self.a - self.d) * half;
        let g = (self.c + self.b) * half;
        let h = (self.c - self.b) * half;
        (e.hypot(h), f.hypot(g))
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }
}

impl<T: Scalar> Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

impl<T: Scalar> AddAssign for Mat2<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

impl<T: Scalar> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl<T: Scalar> Mul<T> for Mat2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }
}

/// Corner positions `A_1, A_2, A_3` of a placed triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrianglePlacement<T> {
    pub corners: [Vec2<T>; 3],
}

impl<T: Scalar> TrianglePlacement<T> {
    pub fn new(a1: Vec2<T>, a2: Vec2<T>, a3: Vec2<T>) -> Self {
        Self { corners: [a1, a2, a3] }
    }

    /// Side vectors `a_1 = A_3 - A_2`, `a_2 = A_1 - A_3`, `a_3 = A_2 - A_1`.
    pub fn side_vectors(&self) -> [Vec2<T>; 3] {
        let [a1, a2, a3] = self.corners;
        [a3 - a2, a1 - a3, a2 - a1]
    }

    pub fn side_lengths(&self) -> [T; 3] {
        self.side_vectors().map(Vec2::norm)
    }

    /// Edge vectors from the first corner, `(A_2 - A_1, A_3 - A_1)`.
    fn edges_from_first(&self) -> (Vec2<T>, Vec2<T>) {
        let [a1, a2, a3] = self.corners;
        (a2 - a1, a3 - a1)
    }
}

/// Linear part of the affine map sending `reference` onto `image`, corner by corner.
pub fn jacobian_from_corners<T: Scalar>(
    reference: &TrianglePlacement<T>,
    image: &TrianglePlacement<T>,
) -> Result<Mat2<T>> {
    let (r1, r2) = reference.edges_from_first();
    let (i1, i2) = image.edges_from_first();
    let inv = Mat2::from_columns(r1, r2).inverse().ok_or(Error::DegenerateTriangle)?;
    Ok(Mat2::from_columns(i1, i2) * inv)
}

/// `min_{R in SO(2)} |M - R|_F`.
///
/// With `M = q R(phi) + r S(psi)` (conformal plus anticonformal part) the signed singular
/// values are `q + r` and `q - r`, so the distance is `sqrt(2 (q - 1)^2 + 2 r^2)`; this
/// covers `det M < 0` (where `q < r`) without a separate branch.
pub fn dist_so2<T: Scalar>(m: &Mat2<T>) -> T {
    dist_so2_sq(m).sqrt()
}

pub fn dist_so2_sq<T: Scalar>(m: &Mat2<T>) -> T {
    let (q, r) = m.conformal_split();
    let two = T::lit(2.0);
    let dq = q - T::one();
    two * (dq * dq + r * r)
}

/// Rotation closest to `m` in Frobenius norm (its polar rotation factor); identity when
/// the conformal part of `m` vanishes.
pub fn nearest_rotation<T: Scalar>(m: &Mat2<T>) -> Mat2<T> {
    let cos = m.a + m.d;
    let sin = m.c - m.b;
    let norm = cos.hypot(sin);
    if norm == T::zero() || !norm.is_finite() {
        return Mat2::identity();
    }
    let (c, s) = (cos / norm, sin / norm);
    Mat2::new(c, -s, s, c)
}

/// Weighted planar Procrustes fit: the rotation minimizing `sum_i w_i |M_i - R|_F^2`.
pub fn best_rotation<T: Scalar>(jacobians: &[(Mat2<T>, T)]) -> Result<Mat2<T>> {
    let mut total = T::zero();
    let mut mean = Mat2::zero();
    for &(m, w) in jacobians {
        if w < T::zero() || !w.is_finite() {
            return Err(Error::InvalidParameter(format!("weight {w} must be finite and >= 0")));
        }
        total = total + w;
        mean += m * w;
    }
    if total <= T::zero() {
        return Err(Error::ZeroWeights);
    }
    Ok(nearest_rotation(&mean))
}

/// Triangle area from side lengths (Heron), in the cancellation-free ordering
/// `a >= b >= c`.
pub fn heron_area<T: Scalar>(a1: T, a2: T, a3: T) -> Result<T> {
    let mut s = [a1, a2, a3];
    if s.iter().any(|x| *x < T::zero() || !x.is_finite()) {
        return Err(Error::TriangleInequality(a1.as_f64(), a2.as_f64(), a3.as_f64()));
    }
    s.sort_by(|x, y| y.partial_cmp(x).expect("finite"));
    let [a, b, c] = s;
    let t2 = c - (a - b);
    if t2 < T::zero() {
        return Err(Error::TriangleInequality(a1.as_f64(), a2.as_f64(), a3.as_f64()));
    }
    let prod = (a + (b + c)) * t2 * (c + (a - b)) * (a + (b - c));
    Ok(T::lit(0.25) * prod.max(T::zero()).sqrt())
}

/// Maximum over the three sides of the central-difference error of `dA/da_j` at
/// `(l, l, l)` against `l / (2 sqrt 3)`.
pub fn heron_gradient_check<T: Scalar>(l: T) -> Result<T> {
    heron_gradient_check_with_step(l, T::lit(1e-6))
}

pub fn heron_gradient_check_with_step<T: Scalar>(l: T, h: T) -> Result<T> {
    let exact = l / (T::lit(2.0) * T::lit(3.0).sqrt());
    let mut worst = T::zero();
    for j in 0..3 {
        let mut plus = [l; 3];
        let mut minus = [l; 3];
        plus[j] = l + h;
        minus[j] = l - h;
        let fd = (heron_area(plus[0], plus[1], plus[2])?
            - heron_area(minus[0], minus[1], minus[2])?)
            / (T::lit(2.0) * h);
        worst = worst.max((fd - exact).abs());
    }
    Ok(worst)
}

/// `1/2 det(A_2 - A_1, A_3 - A_1)`.
pub fn signed_area<T: Scalar>(t: &TrianglePlacement<T>) -> T {
    let (e1, e2) = t.edges_from_first();
    T::lit(0.5) * e1.cross(e2)
}

/// Uniform sample from the open disk of the given radius around the origin.
pub fn uniform_disk<T: Scalar, R: rand::Rng + ?Sized>(rng: &mut R, radius: T) -> Vec2<T> {
    let u: f64 = rng.gen();
    let phi: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let rho = radius.as_f64() * u.sqrt();
    Vec2::new(T::lit(rho * phi.cos()), T::lit(rho * phi.sin()))
}
