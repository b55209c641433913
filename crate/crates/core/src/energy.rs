//! Hamiltonian, energy gap and local energy differences.

use serde::Serialize;

use crate::configuration::{Configuration, EdgeClass, SiteMove};
use crate::error::{Error, Result};
use crate::geometry::{dist_so2_sq, Mat2, Vec2};
use crate::scalar::Scalar;

/// Area of a unit-spacing lattice triangle, `sqrt(3)/4`.
pub fn unit_triangle_area<T: Scalar>() -> T {
    T::lit(3.0).sqrt() / T::lit(4.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyBreakdown<T> {
    /// Pair-potential total over present bonds.
    pub bond_sum: T,
    /// `m * |defects|`.
    pub defect_term: T,
    pub total: T,
    /// `(V(a_1) + V(a_2) + V(a_3) - 3 V(l)) / 2` for present triangles, zero otherwise.
    pub triangle_terms: Vec<T>,
    /// Sum of `V(|bond|) - V(l)` over boundary edges.
    pub boundary_edge_sum: T,
}

/// Outcome of a local energy evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaH<T> {
    Finite(T),
    /// A new bond leaves the potential's domain.
    HardReject,
}

impl<T: Scalar> DeltaH<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            DeltaH::Finite(d) => Some(d),
            DeltaH::HardReject => None,
        }
    }
}

/// Full evaluation of the Hamiltonian. Each undirected bond is visited once.
pub fn hamiltonian<T: Scalar>(c: &Configuration<T>) -> Result<EnergyBreakdown<T>> {
    let lat = c.lattice();
    let spec = c.spec();
    let vl = spec.v_of_l();
    let half = T::lit(0.5);

    let mut bond_sum = T::zero();
    let mut boundary_edge_sum = T::zero();
    for e in 0..lat.num_edges() {
        let class = c.edge_class(e);
        if class == EdgeClass::Absent {
            continue;
        }
        let [a, b] = *lat.edge_ends(e);
        let r = c.bond_vector(a, lat.edge(e).direction as usize).norm();
        let v = spec
            .eval_v(r)
            .map_err(|_| Error::BondOutsideDomain { edge: e, a, b, r: r.as_f64() })?;
        bond_sum = bond_sum + v;
        if class == EdgeClass::Boundary {
            boundary_edge_sum = boundary_edge_sum + (v - vl);
        }
    }

    let mut triangle_terms = vec![T::zero(); lat.num_triangles()];
    for (t, term) in triangle_terms.iter_mut().enumerate() {
        if !c.is_triangle_present(t) {
            continue;
        }
        // Side lengths from the corner images, independent of the edge loop above.
        let mut s = -T::lit(3.0) * vl;
        for a in c.triangle_image(t).side_lengths() {
            s = s + spec.v_unchecked(a);
        }
        *term = half * s;
    }

    let defect_term = spec.m * T::from_usize_exact(c.defect_count());
    Ok(EnergyBreakdown {
        bond_sum,
        defect_term,
        total: bond_sum + defect_term,
        triangle_terms,
        boundary_edge_sum,
    })
}

/// `3 N^2 V(l)`, the energy of the standard configuration.
pub fn standard_energy<T: Scalar>(c: &Configuration<T>) -> T {
    T::from_usize_exact(c.lattice().num_edges()) * c.spec().v_of_l()
}

/// `H(omega) - H(omega_l)`.
pub fn energy_gap<T: Scalar>(c: &Configuration<T>) -> Result<T> {
    Ok(hamiltonian(c)?.total - standard_energy(c))
}

/// `H(omega') - H(omega)` for a single-site move, from the at most six affected bonds.
/// Moves that do not apply to the site's state yield `HardReject`.
pub fn delta_h<T: Scalar>(c: &Configuration<T>, mv: &SiteMove<T>) -> DeltaH<T> {
    let lat = c.lattice();
    let spec = c.spec();
    let (lo, hi) = spec.domain();
    let site = mv.site();
    let nb = lat.neighbors(site);
    let bond_v = |j: usize, u: Vec2<T>| -> Option<T> {
        let r = (c.rest_bond(j) + c.displacement(nb[j]) - u).norm();
        (r >= lo && r <= hi).then(|| spec.v_unchecked(r))
    };
    let mut d = T::zero();
    match *mv {
        SiteMove::Displace { to, .. } => {
            if !c.is_present(site) {
                return DeltaH::HardReject;
            }
            let from = c.displacement(site);
            for j in 0..6 {
                if !c.is_present(nb[j]) {
                    continue;
                }
                match (bond_v(j, to), bond_v(j, from)) {
                    (Some(new), Some(old)) => d = d + (new - old),
                    _ => return DeltaH::HardReject,
                }
            }
        }
        SiteMove::CreateDefect { .. } => {
            if !c.is_present(site) {
                return DeltaH::HardReject;
            }
            let from = c.displacement(site);
            for j in 0..6 {
                if c.is_present(nb[j]) {
                    match bond_v(j, from) {
                        Some(old) => d = d - old,
                        None => return DeltaH::HardReject,
                    }
                }
            }
            d = d + spec.m;
        }
        SiteMove::AnnihilateDefect { to, .. } => {
            if c.is_present(site) {
                return DeltaH::HardReject;
            }
            for j in 0..6 {
                if c.is_present(nb[j]) {
                    match bond_v(j, to) {
                        Some(new) => d = d + new,
                        None => return DeltaH::HardReject,
                    }
                }
            }
            d = d - spec.m;
        }
    }
    DeltaH::Finite(d)
}

/// Deliberate corruption of the decomposition, used to check that the identity suite
/// actually detects errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    #[default]
    None,
    /// Flip the sign of the boundary-edge term.
    FlipBoundarySign,
}

/// Both sides of the half-counting decomposition
/// `H - H(omega_l) + (6V(l) - m)|D| = sum_present (sum_j V(a_j) - 3V(l))/2
///   + sum_boundary (V - V(l))/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition<T> {
    pub lhs: T,
    pub rhs: T,
}

impl<T: Scalar> Decomposition<T> {
    /// `|lhs - rhs| / (1 + |lhs|)`.
    pub fn relative_residual(&self) -> T {
        (self.lhs - self.rhs).abs() / (T::one() + self.lhs.abs())
    }
}

pub fn decomposition<T: Scalar>(c: &Configuration<T>, fault: Fault) -> Result<Decomposition<T>> {
    let spec = c.spec();
    let br = hamiltonian(c)?;
    let k = T::from_usize_exact(c.defect_count());
    let lhs = br.total - standard_energy(c) + (T::lit(6.0) * spec.v_of_l() - spec.m) * k;
    let tri = br.triangle_terms.iter().fold(T::zero(), |acc, &x| acc + x);
    let sign = match fault {
        Fault::None => T::one(),
        Fault::FlipBoundarySign => -T::one(),
    };
    let rhs = tri + sign * T::lit(0.5) * br.boundary_edge_sum;
    Ok(Decomposition { lhs, rhs })
}

/// Relative residual of the decomposition identity.
pub fn decomposition_check<T: Scalar>(c: &Configuration<T>) -> Result<T> {
    Ok(decomposition(c, Fault::None)?.relative_residual())
}

/// Quantities entering the rigidity lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RigidityTerms<T> {
    /// `A = H(omega) - H(omega_l)`.
    pub gap: T,
    /// `sum_t area(t) dist(J_t / l, SO(2))^2`.
    pub rigidity_sum: T,
    /// `sum_t area(t) |J_t / l - I|_F^2`.
    pub l2_deviation: T,
    pub defect_count: usize,
}

pub fn rigidity_lower_bound_check<T: Scalar>(c: &Configuration<T>) -> Result<RigidityTerms<T>> {
    let gap = energy_gap(c)?;
    let area = unit_triangle_area::<T>();
    let inv_l = T::one() / c.spec().l;
    let mut rigidity_sum = T::zero();
    let mut l2_deviation = T::zero();
    for j in c.extension_jacobians() {
        let m = *j * inv_l;
        rigidity_sum = rigidity_sum + area * dist_so2_sq(&m);
        l2_deviation = l2_deviation + area * (m - Mat2::identity()).frobenius_sq();
    }
    Ok(RigidityTerms { gap, rigidity_sum, l2_deviation, defect_count: c.defect_count() })
}
