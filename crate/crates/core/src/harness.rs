//! Batch checks of the exact identities and empirical constants of the rigidity estimates.
//!
//! Identities are checked to a relative tolerance. Inequalities are never checked against
//! fixed constants: each check reports the extremal ratio seen, and passes when that ratio
//! is finite and has the claimed sign.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::configuration::{Configuration, EdgeClass, SiteMove, Snapshot};
use crate::energy::{decomposition, energy_gap, unit_triangle_area, Fault};
use crate::error::{Error, Result};
use crate::geometry::{
    best_rotation, dist_so2_sq, heron_area, signed_area, uniform_disk, Mat2, Vec2,
};
use crate::lattice::{embed, hex_norm, LatticeTorus};
use crate::potential::PotentialSpec;
use crate::scalar::Scalar;

pub const REPORT_SCHEMA: &str = "trilattice-report/1";
/// Relative tolerance of the identity suite.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Near-standard configuration with `defects` holes at random admissible sites.
pub fn random_valid_config<T: Scalar, R: Rng + ?Sized>(
    lattice: Arc<LatticeTorus>,
    spec: Arc<PotentialSpec<T>>,
    r: T,
    defects: usize,
    rng: &mut R,
) -> Result<Configuration<T>> {
    let mut c = Configuration::near_standard_sample(lattice.clone(), spec, r, rng)?;
    let n = lattice.num_sites();
    let mut placed = 0;
    let mut attempts = 0;
    while placed < defects {
        attempts += 1;
        if attempts > 1000 * n {
            return Err(Error::TooManyDefects { requested: defects, max_feasible: placed });
        }
        let site = rng.gen_range(0..n);
        if c.try_apply(&SiteMove::CreateDefect { site }).is_ok() {
            placed += 1;
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
    pub passed: bool,
}

/// Residuals of the exact identities for one configuration, in the order of
/// [`IDENTITY_NAMES`].
pub fn identity_residuals<T: Scalar>(c: &Configuration<T>, fault: Fault) -> Result<[f64; 6]> {
    let lat = c.lattice();
    let l = c.spec().l.as_f64();
    let n = c.n() as f64;
    let k = c.defect_count();

    let decomp = decomposition(c, fault)?.relative_residual().as_f64();

    let target = 3f64.sqrt() / 2.0 * (l * n).powi(2);
    let area: f64 = (0..lat.num_triangles()).map(|t| signed_area(&c.triangle_image(t)).as_f64()).sum();
    let telescoping = (area - target).abs() / target;

    let classes = c.classify_edges();
    let boundary = classes.iter().filter(|&&e| e == EdgeClass::Boundary).count();
    let absent = classes.iter().filter(|&&e| e == EdgeClass::Absent).count();
    let count = (boundary.abs_diff(6 * k) + absent.abs_diff(6 * k)) as f64;

    let nt = lat.num_triangles() as f64;
    let mut mean = Mat2::<f64>::zero();
    for m in c.extension_jacobians() {
        mean += to_f64(m) * (1.0 / nt);
    }
    let mean_jac = (mean - Mat2::scaled_identity(l)).frobenius() / l;

    // Same fact through the slow path: area-weighted deviation from the identity.
    let lam = unit_triangle_area::<f64>();
    let mut orth = Mat2::<f64>::zero();
    for m in c.recompute_jacobians()? {
        orth += (to_f64(&m) * (1.0 / l) - Mat2::identity()) * lam;
    }
    let orthogonality = orth.frobenius() / (lam * nt);

    let cache = c.cache_deviation()?.as_f64();
    Ok([decomp, telescoping, count, mean_jac, orthogonality, cache])
}

pub const IDENTITY_NAMES: [&str; 6] = [
    "half-counting decomposition",
    "signed-area telescoping",
    "boundary/absent edge count",
    "mean jacobian",
    "periodic orthogonality",
    "cache coherence",
];

fn to_f64<T: Scalar>(m: &Mat2<T>) -> Mat2<f64> {
    Mat2::new(m.a.as_f64(), m.b.as_f64(), m.c.as_f64(), m.d.as_f64())
}

pub fn verify_identities<T: Scalar>(configs: &[Configuration<T>], fault: Fault) -> Result<IdentityReport> {
    let mut worst = [0.0f64; 6];
    for c in configs {
        for (w, r) in worst.iter_mut().zip(identity_residuals(c, fault)?) {
            // NaN must not pass.
            *w = if r.is_nan() { f64::NAN } else { w.max(r) };
        }
    }
    let checks: Vec<IdentityCheck> = IDENTITY_NAMES
        .iter()
        .zip(worst)
        .map(|(&name, max_residual)| IdentityCheck {
            name,
            samples: configs.len(),
            max_residual,
            tolerance: IDENTITY_TOL,
            passed: max_residual <= IDENTITY_TOL,
        })
        .collect();
    let passed = checks.iter().all(|c| c.passed);
    Ok(IdentityReport { checks, passed })
}

/// Extremal ratio of an inequality over a sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioCheck {
    pub name: &'static str,
    pub samples: usize,
    /// Samples where the ratio is 0/0 and therefore skipped.
    pub skipped: usize,
    pub min: f64,
    pub max: f64,
    pub passed: bool,
    /// Configuration attaining the minimum (for the lower-bound checks) or maximum (for
    /// the upper-bound checks), when the sample consists of configurations.
    pub witness: Option<Snapshot>,
}

struct RatioFold {
    samples: usize,
    skipped: usize,
    min: f64,
    max: f64,
    arg_min: Option<usize>,
    arg_max: Option<usize>,
    bad: bool,
}

impl RatioFold {
    fn new() -> Self {
        Self {
            samples: 0,
            skipped: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            arg_min: None,
            arg_max: None,
            bad: false,
        }
    }

    /// `num / den`, skipping `0/0`.
    fn push(&mut self, i: usize, num: f64, den: f64) {
        self.samples += 1;
        if den <= 1e-300 && num.abs() <= 1e-300 {
            self.skipped += 1;
            return;
        }
        let r = num / den;
        if !r.is_finite() {
            self.bad = true;
            return;
        }
        if r < self.min {
            self.min = r;
            self.arg_min = Some(i);
        }
        if r > self.max {
            self.max = r;
            self.arg_max = Some(i);
        }
    }

    /// Lower-bound checks pass iff every ratio is finite and strictly positive.
    fn lower(self, name: &'static str, witness: impl Fn(usize) -> Option<Snapshot>) -> RatioCheck {
        let passed = !self.bad && self.samples > self.skipped && self.min > 0.0;
        RatioCheck {
            name,
            samples: self.samples,
            skipped: self.skipped,
            min: self.min,
            max: self.max,
            passed,
            witness: self.arg_min.and_then(witness),
        }
    }

    /// Upper-bound checks pass iff every ratio is finite and nonnegative.
    fn upper(self, name: &'static str, witness: impl Fn(usize) -> Option<Snapshot>) -> RatioCheck {
        let passed = !self.bad && self.samples > self.skipped && self.min >= 0.0 && self.max.is_finite();
        RatioCheck {
            name,
            samples: self.samples,
            skipped: self.skipped,
            min: self.min,
            max: self.max,
            passed,
            witness: self.arg_max.and_then(witness),
        }
    }
}

fn snapshot_of<T: Scalar>(configs: &[Configuration<T>]) -> impl Fn(usize) -> Option<Snapshot> + '_ {
    move |i| Some(configs[i].to_snapshot())
}

/// Empirical defect constant: `max (m |D| - A) / |D|` over configurations with defects.
pub fn fit_defect_constant<T: Scalar>(configs: &[Configuration<T>]) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for c in configs.iter().filter(|c| c.defect_count() > 0) {
        let k = c.defect_count() as f64;
        let v = (c.spec().m.as_f64() * k - energy_gap(c)?.as_f64()) / k;
        best = Some(best.map_or(v, |b| b.max(v)));
    }
    Ok(best)
}

fn area_weighted<T: Scalar>(c: &Configuration<T>) -> (f64, f64) {
    let lam = unit_triangle_area::<f64>();
    let inv_l = 1.0 / c.spec().l.as_f64();
    let mut dist = 0.0;
    let mut dev = 0.0;
    for m in c.extension_jacobians() {
        let m = to_f64(m) * inv_l;
        dist += lam * dist_so2_sq(&m);
        dev += lam * (m - Mat2::identity()).frobenius_sq();
    }
    (dist, dev)
}

/// `[A - (m - c9) |D|] / sum_t area dist(J/l, SO(2))^2`; the minimum estimates the
/// constant in front of the rigidity term.
pub fn energy_rigidity_bound<T: Scalar>(configs: &[Configuration<T>], c9: f64) -> Result<RatioCheck> {
    let mut fold = RatioFold::new();
    for (i, c) in configs.iter().enumerate() {
        let k = c.defect_count() as f64;
        let num = energy_gap(c)?.as_f64() - (c.spec().m.as_f64() - c9) * k;
        fold.push(i, num, area_weighted(c).0);
    }
    Ok(fold.lower("energy lower bound by rigidity", snapshot_of(configs)))
}

/// `[A - (m - c9) |D|] / |J/l - I|^2_{L2}`; positive minimum is the global rigidity bound.
pub fn global_rigidity_bound<T: Scalar>(configs: &[Configuration<T>], c9: f64) -> Result<RatioCheck> {
    let mut fold = RatioFold::new();
    for (i, c) in configs.iter().enumerate() {
        let k = c.defect_count() as f64;
        let num = energy_gap(c)?.as_f64() - (c.spec().m.as_f64() - c9) * k;
        fold.push(i, num, area_weighted(c).1);
    }
    Ok(fold.lower("energy lower bound by distance to identity", snapshot_of(configs)))
}

/// Side lengths of the image of the unit triangle `(0, 1, tau)` under `m`.
fn image_sides(m: &Mat2<f64>) -> [f64; 3] {
    let e1 = Vec2::new(1.0, 0.0);
    let tau = Vec2::from_f64(embed(0, 1));
    [m.mul_vec(tau - e1).norm(), m.mul_vec(tau).norm(), m.mul_vec(e1).norm()]
}

/// Random orientation-preserving matrix `s R (I + eps G)` whose image sides lie in
/// `(1 - window, 1 + window)`.
fn near_rotation<R: Rng + ?Sized>(rng: &mut R, s: f64, window: f64) -> (Mat2<f64>, [f64; 3]) {
    loop {
        let eps = window * rng.gen::<f64>();
        let g: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let th = rng.gen::<f64>() * std::f64::consts::TAU;
        let m = Mat2::rotation(th) * (Mat2::identity() + Mat2::new(g[0], g[1], g[2], g[3]) * eps) * s;
        let sides = image_sides(&m);
        if m.det() > 0.0 && sides.iter().all(|a| (a - 1.0).abs() < window) {
            return (m, sides);
        }
    }
}

/// `sum (a_j - 1)^2 / dist(M, SO(2))^2` over random triangles with sides in
/// `(1 - window, 1 + window)`; both bounds of the equivalence must be finite and positive.
pub fn side_length_equivalence<R: Rng + ?Sized>(rng: &mut R, samples: usize, window: f64) -> RatioCheck {
    let mut fold = RatioFold::new();
    for i in 0..samples {
        let (m, a) = near_rotation(rng, 1.0, window);
        let num: f64 = a.iter().map(|x| (x - 1.0).powi(2)).sum();
        fold.push(i, num, dist_so2_sq(&m));
    }
    fold.lower("side lengths vs distance to rotations", |_| None)
}

/// `[sum V(a_j) - 3V(l) - p(l)(area - area_l)] / dist(M/l, SO(2))^2` for random triangles
/// with sides in the bond window and `l` drawn from `(1 - alpha/2, 1 + alpha/2)`.
pub fn single_triangle_energy<R: Rng + ?Sized>(
    spec: &PotentialSpec<f64>,
    rng: &mut R,
    samples: usize,
) -> Result<RatioCheck> {
    let alpha = spec.alpha;
    let mut fold = RatioFold::new();
    for i in 0..samples {
        let l = 1.0 + alpha * (rng.gen::<f64>() - 0.5);
        let s = spec.clone();
        let s = PotentialSpec { l, ..s };
        // Sides measured from 1, so the window is the bond window itself.
        let (m, a) = loop {
            let (m, a) = near_rotation(rng, l, alpha);
            if a.iter().all(|&x| s.bond_admissible(x)) {
                break (m, a);
            }
        };
        let v: f64 = a.iter().map(|&x| s.v_unchecked(x)).sum();
        let area = heron_area(a[0], a[1], a[2])?;
        let area_l = unit_triangle_area::<f64>() * l * l;
        let num = v - 3.0 * s.v_of_l() - s.pressure_coefficient() * (area - area_l);
        fold.push(i, num, dist_so2_sq(&(m * (1.0 / l))));
    }
    Ok(fold.lower("single-triangle energy vs distance to rotations", |_| None))
}

fn sums_over<T: Scalar>(c: &Configuration<T>, ts: impl IntoIterator<Item = usize>) -> f64 {
    ts.into_iter().map(|t| dist_so2_sq(&to_f64(&c.jacobian(t))).as_f64()).sum()
}

/// `sum_{U0(x)} dist^2 / sum_{U1(x)} dist^2` over every defect `x` of every configuration;
/// the maximum estimates the constant of the inner-layer bound.
pub fn defect_layer_bound<T: Scalar>(configs: &[Configuration<T>]) -> Result<RatioCheck> {
    let mut fold = RatioFold::new();
    for (i, c) in configs.iter().enumerate() {
        for &d in c.defects() {
            let lhs = sums_over(c, c.lattice().layer_u0(d).iter().copied());
            let rhs = sums_over(c, c.lattice().layer_u1(d)?.iter().copied());
            fold.push(i, lhs, rhs);
        }
    }
    Ok(fold.upper("inner layer vs second layer around a defect", snapshot_of(configs)))
}

/// `sum_all dist^2 / sum_present dist^2`; the maximum estimates the constant of the
/// present-triangle equivalence.
pub fn present_triangle_bound<T: Scalar>(configs: &[Configuration<T>]) -> Result<RatioCheck> {
    let mut fold = RatioFold::new();
    for (i, c) in configs.iter().enumerate() {
        let all = sums_over(c, 0..c.lattice().num_triangles());
        let present = sums_over(c, c.present_triangles());
        fold.push(i, all, present);
    }
    Ok(fold.upper("all triangles vs present triangles", snapshot_of(configs)))
}

/// Configuration whose 19-site patch around `center` is rigidly rotated by `theta` about
/// the center, with a hole at the center; everything else standard.
pub fn rotated_patch(
    lattice: Arc<LatticeTorus>,
    spec: Arc<PotentialSpec<f64>>,
    center: usize,
    theta: f64,
) -> Result<Configuration<f64>> {
    let n = lattice.num_sites();
    let l = spec.l;
    let rot = Mat2::rotation(theta);
    let mut disp = vec![Vec2::zero(); n];
    let base = lattice.site(center);
    for dp in -2i64..=2 {
        for dq in -2i64..=2 {
            if hex_norm(dp, dq) > 2 {
                continue;
            }
            let rel = Vec2::from_f64(embed(dp, dq)) * l;
            let s = lattice.site_index(base.offset((dp, dq)));
            disp[s] = rot.mul_vec(rel) - rel;
        }
    }
    let mut present = vec![true; n];
    present[center] = false;
    Configuration::from_parts(lattice, spec, disp, present)
}

/// Outcome of the degenerate direction check: second-layer Jacobians all equal to one
/// rotation force the inner layer to that rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegenerateLayerCheck {
    pub theta: f64,
    pub u1_max_deviation: f64,
    pub u0_max_deviation: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

pub fn degenerate_layer_check(lattice: Arc<LatticeTorus>, spec: Arc<PotentialSpec<f64>>, theta: f64) -> Result<DegenerateLayerCheck> {
    let c = rotated_patch(lattice.clone(), spec.clone(), 0, theta)?;
    let target = Mat2::rotation(theta) * spec.l;
    let dev = |ts: &[usize]| ts.iter().map(|&t| (c.jacobian(t) - target).frobenius()).fold(0.0, f64::max);
    let u0 = lattice.layer_u0(0);
    let u1 = lattice.layer_u1(0)?;
    let scale = 1.0 / spec.l;
    let dist = |ts: &[usize]| ts.iter().map(|&t| dist_so2_sq(&(c.jacobian(t) * scale))).sum::<f64>();
    let (u0_max_deviation, u1_max_deviation) = (dev(u0), dev(u1));
    let (lhs, rhs) = (dist(u0), dist(u1));
    Ok(DegenerateLayerCheck {
        theta,
        u1_max_deviation,
        u0_max_deviation,
        lhs,
        rhs,
        passed: u1_max_deviation < 1e-12 && u0_max_deviation < 1e-12 && lhs < 1e-24 && rhs < 1e-24,
    })
}

/// `|J - R*|_{L2} / |dist(J, SO(2))|_{L2}` for a piecewise-constant gradient field with
/// equal triangle areas; `None` for a rotation field (0/0).
pub fn fjm_ratio(jacobians: &[Mat2<f64>]) -> Option<f64> {
    let weighted: Vec<(Mat2<f64>, f64)> = jacobians.iter().map(|m| (*m, 1.0)).collect();
    let r = best_rotation(&weighted).ok()?;
    let num: f64 = jacobians.iter().map(|m| (*m - r).frobenius_sq()).sum();
    let den: f64 = jacobians.iter().map(dist_so2_sq).sum();
    if den <= 1e-28 {
        return None;
    }
    Some((num / den).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FjmRow {
    pub n: usize,
    pub samples: usize,
    pub skipped: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

/// Amplitudes of the per-site disk noise in the synthetic fields.
pub const FJM_NOISE: [f64; 3] = [0.005, 0.02, 0.05];

/// Random periodic displacement field on the unit-spacing `n`-torus: per-site disk noise,
/// a low-frequency sinusoidal shear, or both.
pub fn synthetic_field<R: Rng + ?Sized>(lattice: &LatticeTorus, kind: usize, rng: &mut R) -> Vec<Vec2<f64>> {
    let n = lattice.n() as f64;
    let sites = lattice.num_sites();
    let noise = FJM_NOISE[kind % 3];
    let with_noise = kind % 4 != 3;
    let with_shear = kind % 2 == 1;
    let k: (i64, i64) = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1)][rng.gen_range(0..5)];
    let phase = rng.gen::<f64>() * std::f64::consts::TAU;
    let dir = rng.gen::<f64>() * std::f64::consts::TAU;
    let e = Vec2::new(dir.cos(), dir.sin());
    let grad = 0.05 * rng.gen::<f64>();
    let amp = grad * n / (std::f64::consts::TAU * ((k.0 * k.0 + k.1 * k.1) as f64).sqrt());
    (0..sites)
        .map(|s| {
            let site = lattice.site(s);
            let mut u = Vec2::zero();
            if with_noise {
                u += uniform_disk(rng, noise);
            }
            if with_shear {
                let arg = std::f64::consts::TAU * (k.0 * site.p + k.1 * site.q) as f64 / n + phase;
                u += e * (amp * arg.sin());
            }
            u
        })
        .collect()
}

/// Empirical FJM constant per torus size over synthetic fields and, when given, sampled
/// configurations of matching size.
pub fn estimate_fjm_constant<R: Rng + ?Sized>(
    sizes: &[usize],
    samples: usize,
    extra: &[Configuration<f64>],
    rng: &mut R,
) -> Result<Vec<FjmRow>> {
    let mut rows = Vec::new();
    for &n in sizes {
        let lattice = Arc::new(LatticeTorus::new(n)?);
        let spec = Arc::new(PotentialSpec::quadratic(1.0, 0.2, 1.0, 0.0, 1.0));
        let mut ratios = Vec::new();
        let mut skipped = 0;
        let mut push = |r: Option<f64>| match r {
            Some(r) => ratios.push(r),
            None => skipped += 1,
        };
        for i in 0..samples {
            let disp = synthetic_field(&lattice, i, rng);
            let c = Configuration::from_parts(lattice.clone(), spec.clone(), disp, vec![true; n * n])?;
            push(fjm_ratio(c.extension_jacobians()));
        }
        for c in extra.iter().filter(|c| c.n() == n) {
            let inv_l = 1.0 / c.spec().l;
            let js: Vec<Mat2<f64>> = c.extension_jacobians().iter().map(|m| *m * inv_l).collect();
            push(fjm_ratio(&js));
        }
        let count = ratios.len();
        rows.push(FjmRow {
            n,
            samples: count + skipped,
            skipped,
            max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_ratio: ratios.iter().sum::<f64>() / count.max(1) as f64,
        });
    }
    Ok(rows)
}

/// Largest relative spread `(max - min) / min` of the per-size maxima.
pub fn fjm_spread(rows: &[FjmRow]) -> f64 {
    let hi = rows.iter().map(|r| r.max_ratio).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|r| r.max_ratio).fold(f64::INFINITY, f64::min);
    (hi - lo) / lo
}

/// Greedy packing of isolated defects in site order.
pub fn pack_defects(lattice: &LatticeTorus) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for s in 0..lattice.num_sites() {
        let site = lattice.site(s);
        if chosen.iter().all(|&d| lattice.torus_graph_distance_ok(site, lattice.site(d))) {
            chosen.push(s);
        }
    }
    chosen
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub k: usize,
    pub gap: f64,
    /// `k (m - 6 V(l))`.
    pub predicted: f64,
    pub decomposition_lhs: f64,
    pub decomposition_rhs: f64,
    pub boundary_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectProbe {
    pub rows: Vec<ProbeRow>,
    /// Least-squares slope of the gap in `k`: the empirical cost of one defect.
    pub cost_per_defect: f64,
    pub intercept: f64,
}

/// Energy gap of `k` packed defects in an otherwise standard configuration.
pub fn defect_energy_probe(spec: Arc<PotentialSpec<f64>>, n: usize, ks: &[usize]) -> Result<DefectProbe> {
    let lattice = Arc::new(LatticeTorus::new(n)?);
    lattice.isolation_zone(0)?;
    let packing = pack_defects(&lattice);
    let sites = lattice.num_sites();
    let mut rows = Vec::new();
    for &k in ks {
        if k > packing.len() {
            return Err(Error::TooManyDefects { requested: k, max_feasible: packing.len() });
        }
        let mut present = vec![true; sites];
        for &d in &packing[..k] {
            present[d] = false;
        }
        let c = Configuration::from_parts(lattice.clone(), spec.clone(), vec![Vec2::zero(); sites], present)?;
        let d = decomposition(&c, Fault::None)?;
        rows.push(ProbeRow {
            k,
            gap: energy_gap(&c)?,
            predicted: k as f64 * (spec.m - 6.0 * spec.v_of_l()),
            decomposition_lhs: d.lhs,
            decomposition_rhs: d.rhs,
            boundary_edges: c.classify_edges().iter().filter(|&&e| e == EdgeClass::Boundary).count(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let (cost_per_defect, intercept) = linear_fit(&xs, &ys);
    Ok(DefectProbe { rows, cost_per_defect, intercept })
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return (f64::NAN, my);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxy / sxx, my - sxy / sxx * mx)
}

/// Envelope for every emitted report.
#[derive(Debug, Clone, Serialize)]
pub struct Report<P: Serialize, B: Serialize> {
    pub schema: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub parameters: P,
    pub body: B,
}

impl<P: Serialize, B: Serialize> Report<P, B> {
    pub fn new(seed: u64, parameters: P, body: B) -> Self {
        Self { schema: REPORT_SCHEMA, version: env!("CARGO_PKG_VERSION"), seed, parameters, body }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One parameter point of the sampled rigidity checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub beta: f64,
    pub m: f64,
    pub l: f64,
}

/// Everything the verification suite needs; reproducible from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub kappa: f64,
    pub alpha: f64,
    /// Torus sizes and per-size count of random configurations for the identity suite.
    pub identity_sizes: Vec<usize>,
    pub identity_samples: usize,
    /// Sampled configurations per parameter point (fit set and test set each).
    pub points: Vec<SamplePoint>,
    pub chain_n: usize,
    pub sampled_configs: usize,
    pub thin: u64,
    pub burn_in: u64,
    /// Random triangles for the single-triangle checks.
    pub synthetic_samples: usize,
    /// Side window of the side-length equivalence.
    pub side_window: f64,
    /// Random defect configurations for the layer checks.
    pub layer_samples: usize,
    pub fjm_sizes: Vec<usize>,
    pub fjm_samples: usize,
    pub fault: Fault,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            kappa: 100.0,
            alpha: 0.2,
            identity_sizes: vec![5, 6, 8],
            identity_samples: 1000,
            points: vec![
                SamplePoint { beta: 100.0, m: 20.0, l: 1.0 },
                SamplePoint { beta: 100.0, m: 0.15, l: 1.0 },
                SamplePoint { beta: 50.0, m: 0.3, l: 1.01 },
            ],
            chain_n: 6,
            sampled_configs: 1000,
            thin: 5,
            burn_in: 200,
            synthetic_samples: 100_000,
            side_window: 0.05,
            layer_samples: 10_000,
            fjm_sizes: vec![5, 8, 12],
            fjm_samples: 1000,
            fault: Fault::None,
        }
    }
}

fn suite_rng(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random valid configurations with 0-3 defects and radii spread over `(0, alpha/4)`.
pub fn random_config_set(
    n: usize,
    spec: Arc<PotentialSpec<f64>>,
    count: usize,
    min_defects: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Configuration<f64>>> {
    let lattice = Arc::new(LatticeTorus::new(n)?);
    let r_max = spec.alpha / 4.0;
    (0..count)
        .map(|i| {
            let r = r_max * (0.02 + 0.97 * rng.gen::<f64>());
            random_valid_config(lattice.clone(), spec.clone(), r, min_defects + i % (4 - min_defects.min(3)), rng)
        })
        .collect()
}

/// Identity suite on random configurations of every size in the config.
pub fn identity_suite(cfg: &SuiteConfig) -> Result<IdentityReport> {
    let mut all = Vec::new();
    for (k, &n) in cfg.identity_sizes.iter().enumerate() {
        let mut rng = suite_rng(cfg.seed, 100 + k as u64);
        let l = 1.0 + 0.01 * k as f64;
        let spec = Arc::new(PotentialSpec::quadratic(cfg.kappa, cfg.alpha, l, 20.0, 100.0));
        all.extend(random_config_set(n, spec, cfg.identity_samples, 0, &mut rng)?);
    }
    verify_identities(&all, cfg.fault)
}

/// Configurations sampled from the chain at one parameter point.
pub fn sampled_configs(cfg: &SuiteConfig, p: &SamplePoint, stream: u64) -> Result<Vec<Configuration<f64>>> {
    use crate::sampler::{Chain, ChainParams};
    let lattice = Arc::new(LatticeTorus::new(cfg.chain_n)?);
    let spec = Arc::new(PotentialSpec::quadratic(cfg.kappa, cfg.alpha, p.l, p.m, p.beta));
    spec.validate().into_result()?;
    let start = Configuration::standard(lattice, spec);
    let mut chain = Chain::new(start, ChainParams::continuous(cfg.alpha), cfg.seed, stream)?;
    chain.collect_configs(cfg.burn_in, cfg.sampled_configs, cfg.thin)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub point: SamplePoint,
    /// Raw fit `max (m|D| - A)/|D|` on the fit set, if it had defects.
    pub c9_fit: Option<f64>,
    /// Value used in the checks: fit plus one.
    pub c9_used: f64,
    pub defect_configs: usize,
    pub energy_rigidity: RatioCheck,
    pub global_rigidity: RatioCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub points: Vec<PointReport>,
    pub side_lengths: RatioCheck,
    pub single_triangle: RatioCheck,
    pub defect_layer: RatioCheck,
    pub degenerate_layer: DegenerateLayerCheck,
    pub present_triangles: RatioCheck,
    pub fjm: Vec<FjmRow>,
    pub fjm_spread: f64,
    pub fjm_passed: bool,
    pub defect_probe: DefectProbe,
    pub passed: bool,
}

/// Maximum relative spread of the per-size FJM maxima.
pub const FJM_SPREAD_TOL: f64 = 0.25;

pub fn inequality_suite(cfg: &SuiteConfig) -> Result<InequalityReport> {
    let points = std::thread::scope(|scope| -> Result<Vec<PointReport>> {
        let handles: Vec<_> = cfg
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                scope.spawn(move || -> Result<PointReport> {
                    let fit = sampled_configs(cfg, p, 2 * i as u64)?;
                    let test = sampled_configs(cfg, p, 2 * i as u64 + 1)?;
                    let c9_fit = fit_defect_constant(&fit)?;
                    let c9_used = c9_fit.unwrap_or(0.0) + 1.0;
                    Ok(PointReport {
                        point: *p,
                        c9_fit,
                        c9_used,
                        defect_configs: test.iter().filter(|c| c.defect_count() > 0).count(),
                        energy_rigidity: energy_rigidity_bound(&test, c9_used)?,
                        global_rigidity: global_rigidity_bound(&test, c9_used)?,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("suite thread panicked")).collect()
    })?;

    let spec = Arc::new(PotentialSpec::quadratic(cfg.kappa, cfg.alpha, 1.0, 20.0, 100.0));
    let mut rng = suite_rng(cfg.seed, 200);
    let side_lengths = side_length_equivalence(&mut rng, cfg.synthetic_samples, cfg.side_window);
    let single_triangle = single_triangle_energy(&spec, &mut rng, cfg.synthetic_samples)?;

    let mut rng = suite_rng(cfg.seed, 201);
    let layer_set = random_config_set(cfg.chain_n, spec.clone(), cfg.layer_samples, 1, &mut rng)?;
    let defect_layer = defect_layer_bound(&layer_set)?;
    let present_triangles = present_triangle_bound(&layer_set)?;
    let lattice = Arc::new(LatticeTorus::new(cfg.chain_n)?);
    let degenerate_layer = degenerate_layer_check(lattice, spec.clone(), 0.02)?;

    let mut rng = suite_rng(cfg.seed, 202);
    let fjm = estimate_fjm_constant(&cfg.fjm_sizes, cfg.fjm_samples, &[], &mut rng)?;
    let fjm_spread = fjm_spread(&fjm);
    let fjm_passed = fjm_spread <= FJM_SPREAD_TOL && fjm.iter().all(|r| r.max_ratio.is_finite());

    let defect_probe = defect_energy_probe(spec, cfg.chain_n.max(8), &[0, 1, 2, 3, 4])?;

    let passed = points.iter().all(|p| p.energy_rigidity.passed && p.global_rigidity.passed)
        && side_lengths.passed
        && single_triangle.passed
        && defect_layer.passed
        && degenerate_layer.passed
        && present_triangles.passed
        && fjm_passed;
    Ok(InequalityReport {
        points,
        side_lengths,
        single_triangle,
        defect_layer,
        degenerate_layer,
        present_triangles,
        fjm,
        fjm_spread,
        fjm_passed,
        defect_probe,
        passed,
    })
}
