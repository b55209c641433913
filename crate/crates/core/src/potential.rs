//! Pair potential `V` and the model parameters `(alpha, l, m, beta)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Grid used for the sampled convexity check and for sup/Lipschitz estimates.
pub const VALIDATION_GRID: usize = 1001;
/// Tolerance on `|V'(1)|`.
pub const STATIONARITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind<T> {
    /// `V(r) = kappa/2 (r - 1)^2`.
    Quadratic { kappa: T },
    /// Clamped cubic spline through `(r, V(r))` knots.
    Tabulated(Spline<T>),
}

/// Cubic spline whose end slopes are taken from the parabola through the three end knots,
/// so quadratic data are reproduced exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Spline<T> {
    r: Vec<T>,
    v: Vec<T>,
    /// Second derivatives at the knots.
    m2: Vec<T>,
}

impl<T: Scalar> Spline<T> {
    pub fn new(knots: &[(T, T)]) -> Result<Self> {
        if knots.len() < 3 {
            return Err(Error::InvalidPotential("tabulated potential needs at least 3 knots".into()));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidPotential(format!(
                    "knot radii must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if knots.iter().any(|(r, v)| !r.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidPotential("non-finite knot".into()));
        }
        let r: Vec<T> = knots.iter().map(|k| k.0).collect();
        let v: Vec<T> = knots.iter().map(|k| k.1).collect();
        let n = r.len();
        let s0 = parabola_slope(&r[..3], &v[..3], r[0]);
        let sn = parabola_slope(&r[n - 3..], &v[n - 3..], r[n - 1]);
        let m2 = clamped_second_derivatives(&r, &v, s0, sn);
        Ok(Self { r, v, m2 })
    }

    pub fn knots(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.r.iter().copied().zip(self.v.iter().copied())
    }

    pub fn range(&self) -> (T, T) {
        (self.r[0], self.r[self.r.len() - 1])
    }

    fn interval(&self, x: T) -> usize {
        let n = self.r.len();
        match self.r.partition_point(|&ri| ri <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    pub fn value(&self, x: T) -> T {
        let i = self.interval(x);
        let h = self.r[i + 1] - self.r[i];
        let a = (self.r[i + 1] - x) / h;
        let b = (x - self.r[i]) / h;
        let six = T::lit(6.0);
        a * self.v[i]
            + b * self.v[i + 1]
            + ((a * a * a - a) * self.m2[i] + (b * b * b - b) * self.m2[i + 1]) * h * h / six
    }

    pub fn derivative(&self, x: T) -> T {
        let i = self.interval(x);
        let h = self.r[i + 1] - self.r[i];
        let a = (self.r[i + 1] - x) / h;
        let b = (x - self.r[i]) / h;
        let three = T::lit(3.0);
        let six = T::lit(6.0);
        (self.v[i + 1] - self.v[i]) / h
            - (three * a * a - T::one()) * h * self.m2[i] / six
            + (three * b * b - T::one()) * h * self.m2[i + 1] / six
    }
}

fn parabola_slope<T: Scalar>(r: &[T], v: &[T], at: T) -> T {
    // Derivative of the Lagrange interpolant through three points.
    let (x0, x1, x2) = (r[0], r[1], r[2]);
    let (y0, y1, y2) = (v[0], v[1], v[2]);
    y0 * ((at - x1) + (at - x2)) / ((x0 - x1) * (x0 - x2))
        + y1 * ((at - x0) + (at - x2)) / ((x1 - x0) * (x1 - x2))
        + y2 * ((at - x0) + (at - x1)) / ((x2 - x0) * (x2 - x1))
}

fn clamped_second_derivatives<T: Scalar>(r: &[T], v: &[T], s0: T, sn: T) -> Vec<T> {
    let n = r.len();
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    // Tridiagonal system, solved by the Thomas algorithm.
    let mut sub = vec![T::zero(); n];
    let mut diag = vec![T::zero(); n];
    let mut sup = vec![T::zero(); n];
    let mut rhs = vec![T::zero(); n];
    let h0 = r[1] - r[0];
    diag[0] = two * h0;
    sup[0] = h0;
    rhs[0] = six * ((v[1] - v[0]) / h0 - s0);
    for i in 1..n - 1 {
        let hl = r[i] - r[i - 1];
        let hr = r[i + 1] - r[i];
        sub[i] = hl;
        diag[i] = two * (hl + hr);
        sup[i] = hr;
        rhs[i] = six * ((v[i + 1] - v[i]) / hr - (v[i] - v[i - 1]) / hl);
    }
    let hn = r[n - 1] - r[n - 2];
    sub[n - 1] = hn;
    diag[n - 1] = two * hn;
    rhs[n - 1] = six * (sn - (v[n - 1] - v[n - 2]) / hn);
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] = diag[i] - w * sup[i - 1];
        rhs[i] = rhs[i] - w * rhs[i - 1];
    }
    let mut m = vec![T::zero(); n];
    m[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
    }
    m
}

/// Potential together with the model parameters it is used with.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec<T> {
    pub kind: PotentialKind<T>,
    /// Half-width of the admissible bond-length window `(1 - alpha, 1 + alpha)`.
    pub alpha: T,
    /// Lattice spacing of the standard configuration.
    pub l: T,
    /// Chemical potential of a vacancy.
    pub m: T,
    /// Inverse temperature.
    pub beta: T,
}

impl<T: Scalar> PotentialSpec<T> {
    pub fn quadratic(kappa: T, alpha: T, l: T, m: T, beta: T) -> Self {
        Self { kind: PotentialKind::Quadratic { kappa }, alpha, l, m, beta }
    }

    pub fn with_beta(&self, beta: T) -> Self {
        Self { beta, ..self.clone() }
    }

    pub fn with_m(&self, m: T) -> Self {
        Self { m, ..self.clone() }
    }

    pub fn domain(&self) -> (T, T) {
        (T::one() - self.alpha, T::one() + self.alpha)
    }

    /// Open bond window of (Omega1).
    #[inline]
    pub fn bond_admissible(&self, r: T) -> bool {
        r > T::one() - self.alpha && r < T::one() + self.alpha
    }

    /// `V(r)`; errors outside `[1 - alpha, 1 + alpha]`.
    pub fn eval_v(&self, r: T) -> Result<T> {
        let (lo, hi) = self.domain();
        if !(r >= lo && r <= hi) {
            return Err(Error::OutsideDomain { r: r.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() });
        }
        Ok(self.v_unchecked(r))
    }

    /// `V(r)` without the domain check; callers enforce (Omega1).
    #[inline]
    pub fn v_unchecked(&self, r: T) -> T {
        match &self.kind {
            PotentialKind::Quadratic { kappa } => {
                let d = r - T::one();
                T::lit(0.5) * *kappa * d * d
            }
            PotentialKind::Tabulated(s) => s.value(r),
        }
    }

    pub fn dv(&self, r: T) -> T {
        match &self.kind {
            PotentialKind::Quadratic { kappa } => *kappa * (r - T::one()),
            PotentialKind::Tabulated(s) => s.derivative(r),
        }
    }

    /// `V(l)`, the per-bond energy of the standard configuration.
    pub fn v_of_l(&self) -> T {
        self.v_unchecked(self.l)
    }

    /// `p(l) = 2 sqrt(3) V'(l) / l`; central difference for tabulated potentials.
    pub fn pressure_coefficient(&self) -> T {
        let dv = match &self.kind {
            PotentialKind::Quadratic { kappa } => *kappa * (self.l - T::one()),
            PotentialKind::Tabulated(_) => {
                let h = T::lit(1e-5);
                (self.v_unchecked(self.l + h) - self.v_unchecked(self.l - h)) / (T::lit(2.0) * h)
            }
        };
        T::lit(2.0) * T::lit(3.0).sqrt() * dv / self.l
    }

    fn grid(&self) -> Vec<T> {
        let (lo, hi) = self.domain();
        let step = (hi - lo) / T::from_usize_exact(VALIDATION_GRID - 1);
        (0..VALIDATION_GRID).map(|i| lo + step * T::from_usize_exact(i)).collect()
    }

    /// `sup |V|` on the domain, sampled.
    pub fn sup_abs_v(&self) -> T {
        self.grid().into_iter().map(|r| self.v_unchecked(r).abs()).fold(T::zero(), T::max)
    }

    /// Largest finite-difference slope of `V` on the validation grid.
    pub fn lipschitz_estimate(&self) -> T {
        let g = self.grid();
        g.windows(2)
            .map(|w| ((self.v_unchecked(w[1]) - self.v_unchecked(w[0])) / (w[1] - w[0])).abs())
            .fold(T::zero(), T::max)
    }

    /// Check the standing assumptions; each failure is reported, none is raised.
    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();
        let alpha_ok = self.alpha > T::zero() && self.alpha < T::one();
        checks.push(AssumptionCheck {
            assumption: 0,
            name: "parameters",
            passed: alpha_ok && self.beta > T::zero() && self.l > T::zero() && self.m.is_finite(),
            detail: format!(
                "alpha = {} in (0,1), beta = {} > 0, l = {} > 0, m = {} finite",
                self.alpha, self.beta, self.l, self.m
            ),
        });

        // Assumption 2: V defined on [1 - alpha, 1 + alpha].
        let (lo, hi) = self.domain();
        let (defined, detail) = match &self.kind {
            PotentialKind::Quadratic { kappa } => (
                *kappa > T::zero() && kappa.is_finite(),
                format!("quadratic, kappa = {kappa}"),
            ),
            PotentialKind::Tabulated(s) => {
                let (a, b) = s.range();
                (a <= lo && b >= hi, format!("knots cover [{a}, {b}], need [{lo}, {hi}]"))
            }
        };
        let finite = alpha_ok && self.grid().iter().all(|&r| self.v_unchecked(r).is_finite());
        checks.push(AssumptionCheck {
            assumption: 2,
            name: "V defined on [1-alpha, 1+alpha]",
            passed: defined && finite,
            detail,
        });

        // Assumption 1: V'' > 0 (sampled) and V'(1) = 0.
        let (convex, min_second) = if alpha_ok {
            let g = self.grid();
            let h = g[1] - g[0];
            let min_second = g
                .windows(3)
                .map(|w| {
                    (self.v_unchecked(w[2]) - T::lit(2.0) * self.v_unchecked(w[1])
                        + self.v_unchecked(w[0]))
                        / (h * h)
                })
                .fold(T::infinity(), T::min);
            (min_second > T::zero(), min_second)
        } else {
            (false, T::nan())
        };
        let slope_at_one = self.dv(T::one());
        checks.push(AssumptionCheck {
            assumption: 1,
            name: "V'' > 0 and V'(1) = 0",
            passed: convex && slope_at_one.abs().as_f64() <= STATIONARITY_TOL,
            detail: format!("min sampled V'' = {min_second}, V'(1) = {slope_at_one}"),
        });

        // Assumption 3: l in (1 - alpha/2, 1 + alpha/2).
        let half = self.alpha * T::lit(0.5);
        checks.push(AssumptionCheck {
            assumption: 3,
            name: "l in (1-alpha/2, 1+alpha/2)",
            passed: self.l > T::one() - half && self.l < T::one() + half,
            detail: format!("l = {}, window ({}, {})", self.l, T::one() - half, T::one() + half),
        });
        checks.sort_by_key(|c| c.assumption);
        ValidationReport { checks }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionCheck {
    /// Standing assumption number (0 = basic parameter ranges).
    pub assumption: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn into_result(self) -> Result<Self> {
        if self.all_passed() {
            return Ok(self);
        }
        let msg = self
            .failures()
            .map(|c| format!("assumption {} ({}) failed: {}", c.assumption, c.name, c.detail))
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidPotential(msg))
    }
}

/// Parse a two-column `r V(r)` table (whitespace or comma separated, `#` comments).
pub fn parse_table<T: Scalar>(text: &str) -> Result<Vec<(T, T)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> =
            line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if cols.len() != 2 {
            return Err(Error::InvalidPotential(format!(
                "line {}: expected 2 columns, found {}",
                lineno + 1,
                cols.len()
            )));
        }
        let parse = |s: &str| -> Result<T> {
            s.parse::<f64>().map(T::lit).map_err(|e| {
                Error::InvalidPotential(format!("line {}: {s:?}: {e}", lineno + 1))
            })
        };
        out.push((parse(cols[0])?, parse(cols[1])?));
    }
    Ok(out)
}

pub fn read_table<T: Scalar>(path: &Path) -> Result<Vec<(T, T)>> {
    parse_table(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(l: f64) -> PotentialSpec<f64> {
        PotentialSpec::quadratic(100.0, 0.1, l, 20.0, 50.0)
    }

    fn tabulated_from(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> PotentialKind<f64> {
        let knots: Vec<_> = (0..n)
            .map(|i| {
                let r = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (r, f(r))
            })
            .collect();
        PotentialKind::Tabulated(Spline::new(&knots).unwrap())
    }

    #[test]
    fn quadratic_values() {
        let s = quad(1.0);
        assert_eq!(s.eval_v(1.0).unwrap(), 0.0);
        assert!((s.eval_v(1.02).unwrap() - 0.02).abs() < 1e-14);
        assert!(matches!(s.eval_v(1.2), Err(Error::OutsideDomain { .. })));
        assert!(s.eval_v(0.9).is_ok());
    }

    #[test]
    fn tabulated_reproduces_quadratic() {
        let mut s = quad(1.0);
        s.kind = tabulated_from(|r| 50.0 * (r - 1.0).powi(2), 0.85, 1.15, 31);
        let q = quad(1.0);
        for i in 0..1000 {
            let r = 0.9 + 0.2 * i as f64 / 999.0;
            assert!((s.eval_v(r).unwrap() - q.eval_v(r).unwrap()).abs() <= 1e-6);
        }
        assert!(s.validate().all_passed(), "{:?}", s.validate());
    }

    #[test]
    fn pressure_coefficient_values() {
        assert_eq!(quad(1.0).pressure_coefficient(), 0.0);
        let p = quad(1.01).pressure_coefficient();
        let want = 2.0 * 3f64.sqrt() * 100.0 * 0.01 / 1.01;
        assert!((p - want).abs() < 1e-12);
        assert!((p - 3.4298).abs() < 1e-4);
        for l in [0.97, 0.99, 1.0, 1.02, 1.04] {
            let p = quad(l).pressure_coefficient();
            assert_eq!(p.partial_cmp(&0.0), (l - 1.0).partial_cmp(&0.0));
        }
    }

    #[test]
    fn validation_examples() {
        assert!(quad(1.0).validate().all_passed());
        let report = quad(1.1).validate();
        let failed: Vec<u8> = report.failures().map(|c| c.assumption).collect();
        assert_eq!(failed, vec![3]);
        let err = quad(1.1).validate().into_result().unwrap_err().to_string();
        assert!(err.contains("assumption 3"), "{err}");

        let mut concave = quad(1.0);
        concave.kind = tabulated_from(|r| -50.0 * (r - 1.0).powi(2), 0.85, 1.15, 31);
        let failed: Vec<u8> = concave.validate().failures().map(|c| c.assumption).collect();
        assert_eq!(failed, vec![1]);

        let mut short = quad(1.0);
        short.kind = tabulated_from(|r| 50.0 * (r - 1.0).powi(2), 0.95, 1.15, 21);
        assert!(short.validate().failures().any(|c| c.assumption == 2));

        let mut off_center = quad(1.0);
        off_center.kind = tabulated_from(|r| 50.0 * (r - 1.02).powi(2), 0.85, 1.15, 31);
        assert!(off_center.validate().failures().any(|c| c.assumption == 1));
    }

    #[test]
    fn lipschitz_bound_holds() {
        let s = quad(1.0);
        let lip = s.lipschitz_estimate();
        // kappa * alpha, up to grid resolution.
        assert!((lip - 10.0).abs() < 0.02);
        let h = 1e-3;
        let mut r = 0.9;
        while r + h <= 1.1 {
            assert!((s.v_unchecked(r + h) - s.v_unchecked(r)).abs() <= lip * h + 1e-12);
            r += h;
        }
        assert!((s.sup_abs_v() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn table_parsing() {
        let t: Vec<(f64, f64)> = parse_table("# r V\n0.9 0.5\n1.0, 0\n\n1.1 0.5 # end\n").unwrap();
        assert_eq!(t, vec![(0.9, 0.5), (1.0, 0.0), (1.1, 0.5)]);
        assert!(parse_table::<f64>("1 2 3\n").is_err());
        assert!(parse_table::<f64>("a b\n").is_err());
        let bad = [(1.0, 0.0), (0.9, 0.1), (1.1, 0.2)];
        assert!(Spline::new(&bad).is_err());
    }
}
