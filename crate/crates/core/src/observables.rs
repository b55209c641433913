//! Per-sample observables and batch-means error estimates.

use serde::{Deserialize, Serialize};

use std::sync::Arc;

use crate::configuration::Configuration;
use crate::energy::{energy_gap, unit_triangle_area};
use crate::error::{Error, Result};
use crate::geometry::{dist_so2_sq, Mat2};
use crate::lattice::LatticeTorus;
use crate::potential::PotentialSpec;
use crate::sampler::{run_parallel, Chain, ChainParams, ChainResult, RunSchedule};
use crate::scalar::Scalar;

/// Number of batches used for batch-means error bars.
pub const BATCHES: usize = 32;
/// Minimum stream length accepted by [`estimate`].
pub const MIN_SAMPLES: usize = 100;
/// Scalar observables in output order.
pub const SCALAR_COLUMNS: [&str; 5] = ["bond_dev_sq", "jac_dev_sq", "rigidity_sum", "defect_count", "energy_gap"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub step: u64,
    /// Mean of `|omega_hat(x+z) - omega_hat(x) - l z|^2` over all bonds.
    pub bond_dev_sq: f64,
    /// Same, counting only bonds with both ends present; absent bonds contribute zero.
    pub present_bond_dev_sq: f64,
    /// Largest per-direction mean of the bond deviation.
    pub bond_dev_sq_max_dir: f64,
    /// Mean of `|J - l I|_F^2` over triangles.
    pub jac_dev_sq: f64,
    /// `sum_t area(t) dist(J_t / l, SO(2))^2`.
    pub rigidity_sum: f64,
    pub defect_count: usize,
    pub energy_gap: f64,
    /// `omega_hat(x0 + tau^j) - omega_hat(x0)` at site 0 for the six directions.
    pub site_bonds: [[f64; 2]; 6],
}

impl ObservableRecord {
    /// Names and values of the scalar columns, in output order.
    pub fn scalars(&self) -> [(&'static str, f64); 5] {
        let v = [self.bond_dev_sq, self.jac_dev_sq, self.rigidity_sum, self.defect_count as f64, self.energy_gap];
        std::array::from_fn(|i| (SCALAR_COLUMNS[i], v[i]))
    }

    /// One newline-terminated CSV row under [`csv_header`].
    pub fn csv_row(&self) -> String {
        let mut s = self.step.to_string();
        for (_, v) in self.scalars() {
            s.push(',');
            s.push_str(&full_precision(v));
        }
        s.push('\n');
        s
    }
}

/// Scientific notation with 17 significant digits, enough to round-trip any `f64`.
pub fn full_precision(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_header() -> String {
    format!("step,{}\n", SCALAR_COLUMNS.join(","))
}

pub fn measure<T: Scalar>(c: &Configuration<T>, step: u64) -> Result<ObservableRecord> {
    let lat = c.lattice();
    let n_sites = lat.num_sites();
    let mut per_dir = [0.0f64; 3];
    let mut total = 0.0;
    let mut present_sum = 0.0;
    for s in 0..n_sites {
        for j in 0..3 {
            let d = (c.hat_bond_vector(s, j) - c.rest_bond(j)).norm_sq().as_f64();
            per_dir[j] += d;
            total += d;
            if c.is_present(s) && c.is_present(lat.neighbors(s)[j]) {
                present_sum += d;
            }
        }
    }
    let bonds = (3 * n_sites) as f64;
    let bond_dev_sq = total / bonds;
    let bond_dev_sq_max_dir = per_dir.iter().fold(0.0f64, |a, &b| a.max(b)) / n_sites as f64;

    let l = c.spec().l;
    let inv_l = T::one() / l;
    let area = unit_triangle_area::<T>().as_f64();
    let mut jac_sum = 0.0;
    let mut rig = 0.0;
    for m in c.extension_jacobians() {
        jac_sum += (*m - Mat2::scaled_identity(l)).frobenius_sq().as_f64();
        rig += area * dist_so2_sq(&(*m * inv_l)).as_f64();
    }

    let site_bonds = std::array::from_fn(|j| {
        let v = c.hat_bond_vector(0, j);
        [v.x.as_f64(), v.y.as_f64()]
    });
    Ok(ObservableRecord {
        step,
        bond_dev_sq,
        present_bond_dev_sq: present_sum / bonds,
        bond_dev_sq_max_dir,
        jac_dev_sq: jac_sum / lat.num_triangles() as f64,
        rigidity_sum: rig,
        defect_count: c.defect_count(),
        energy_gap: energy_gap(c)?.as_f64(),
        site_bonds,
    })
}

/// Mean with batch-means error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Integrated autocorrelation time, `n * stderr^2 / variance`; 1 for a constant stream.
    pub tau_int: f64,
    pub variance: f64,
}

/// Batch-means estimate over `BATCHES` equal batches. Samples beyond the last full batch
/// are dropped from the error estimate but kept in the mean.
pub fn estimate(xs: &[f64]) -> Result<Summary> {
    let n = xs.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: n });
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let variance = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let b = n / BATCHES;
    let used = &xs[..b * BATCHES];
    let used_mean = used.iter().sum::<f64>() / used.len() as f64;
    let batch_var = used
        .chunks(b)
        .map(|c| (c.iter().sum::<f64>() / b as f64 - used_mean).powi(2))
        .sum::<f64>()
        / (BATCHES - 1) as f64;
    let stderr = (batch_var / BATCHES as f64).sqrt();
    let tau_int = if variance > 0.0 { n as f64 * stderr * stderr / variance } else { 1.0 };
    Ok(Summary { n, mean, stderr, tau_int, variance })
}

/// Summaries of the scalar columns of a record stream.
pub fn summarize(records: &[ObservableRecord]) -> Result<Vec<(&'static str, Summary)>> {
    let Some(first) = records.first() else {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: 0 });
    };
    let names = first.scalars().map(|(k, _)| k);
    names
        .iter()
        .enumerate()
        .map(|(i, &name)| {
            let xs: Vec<f64> = records.iter().map(|r| r.scalars()[i].1).collect();
            Ok((name, estimate(&xs)?))
        })
        .collect()
}

/// Estimates of `E[omega_hat(x0 + tau^j) - omega_hat(x0)]`, one `(x, y)` pair per direction.
pub fn site_bond_means(records: &[ObservableRecord]) -> Result<[[Summary; 2]; 6]> {
    let mut out = [[None; 2]; 6];
    for (j, row) in out.iter_mut().enumerate() {
        for (k, slot) in row.iter_mut().enumerate() {
            let xs: Vec<f64> = records.iter().map(|r| r.site_bonds[j][k]).collect();
            *slot = Some(estimate(&xs)?);
        }
    }
    Ok(out.map(|r| r.map(|s| s.expect("filled above"))))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn strictly_decreasing(ys: &[f64]) -> bool {
    ys.windows(2).all(|w| w[1] < w[0])
}

pub fn non_increasing(ys: &[f64]) -> bool {
    ys.windows(2).all(|w| w[1] <= w[0])
}

/// Combine per-chain summaries of the same observable: mean of means, error bars added in
/// quadrature.
pub fn combine(parts: &[Summary]) -> Summary {
    let k = parts.len() as f64;
    let mean = parts.iter().map(|s| s.mean).sum::<f64>() / k;
    let stderr = parts.iter().map(|s| s.stderr * s.stderr).sum::<f64>().sqrt() / k;
    Summary {
        n: parts.iter().map(|s| s.n).sum(),
        mean,
        stderr,
        tau_int: parts.iter().map(|s| s.tau_int).sum::<f64>() / k,
        variance: parts.iter().map(|s| s.variance).sum::<f64>() / k,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub n: usize,
    pub kappa: f64,
    pub alpha: f64,
    pub l: f64,
    pub betas: Vec<f64>,
    pub ms: Vec<f64>,
    pub schedule: RunSchedule,
    pub chains: usize,
    pub seed: u64,
    pub params: ChainParams,
}

impl ScanConfig {
    /// Quadratic potential on the `n`-torus with default chain settings.
    pub fn quadratic(n: usize, kappa: f64, betas: Vec<f64>, ms: Vec<f64>, schedule: RunSchedule, seed: u64) -> Self {
        Self {
            n,
            kappa,
            alpha: 0.2,
            l: 1.0,
            betas,
            ms,
            schedule,
            chains: 1,
            seed,
            params: ChainParams::continuous(0.2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub beta: f64,
    pub m: f64,
    pub bond_dev_sq: Summary,
    pub jac_dev_sq: Summary,
    /// Defects per site.
    pub defect_density: Summary,
    pub acceptance: [f64; 3],
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub config: ScanConfig,
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    /// Rows at fixed `m`, in increasing `beta`.
    pub fn at_m(&self, m: f64) -> Vec<&ScanRow> {
        let mut rows: Vec<&ScanRow> = self.rows.iter().filter(|r| r.m == m).collect();
        rows.sort_by(|a, b| a.beta.total_cmp(&b.beta));
        rows
    }

    /// Rows at fixed `beta`, in increasing `m`.
    pub fn at_beta(&self, beta: f64) -> Vec<&ScanRow> {
        let mut rows: Vec<&ScanRow> = self.rows.iter().filter(|r| r.beta == beta).collect();
        rows.sort_by(|a, b| a.m.total_cmp(&b.m));
        rows
    }

    /// Log-log slope of mean `bond_dev_sq` against `beta` at fixed `m`.
    pub fn bond_slope(&self, m: f64) -> f64 {
        let rows = self.at_m(m);
        let x: Vec<f64> = rows.iter().map(|r| r.beta).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.bond_dev_sq.mean).collect();
        log_log_slope(&x, &y)
    }
}

/// Run independent chains over the `(beta, m)` grid, in parallel, and summarise.
pub fn symmetry_breaking_scan(cfg: &ScanConfig) -> Result<ScanTable> {
    if cfg.betas.len() < 4 && cfg.ms.len() < 2 {
        return Err(Error::InvalidParameter("a scan needs at least 4 beta values".into()));
    }
    let lattice = Arc::new(LatticeTorus::new(cfg.n)?);
    let points: Vec<(f64, f64)> =
        cfg.ms.iter().flat_map(|&m| cfg.betas.iter().map(move |&b| (b, m))).collect();
    let chains = cfg.chains.max(1);
    let make = |i: usize| -> Result<Chain<f64>> {
        let (beta, m) = points[i / chains];
        let spec = Arc::new(PotentialSpec::quadratic(cfg.kappa, cfg.alpha, cfg.l, m, beta));
        spec.validate().into_result()?;
        Chain::new(Configuration::standard(lattice.clone(), spec), cfg.params, cfg.seed, i as u64)
    };
    let results = run_parallel(points.len() * chains, make, &cfg.schedule)?;
    let sites = lattice.num_sites() as f64;
    let mut rows = Vec::new();
    for (p, &(beta, m)) in points.iter().enumerate() {
        let group = &results[p * chains..(p + 1) * chains];
        let column = |f: &dyn Fn(&ObservableRecord) -> f64| -> Result<Summary> {
            let parts = group
                .iter()
                .map(|g| estimate(&g.records.iter().map(f).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?;
            Ok(combine(&parts))
        };
        let rate = |f: &dyn Fn(&ChainResult) -> f64| group.iter().map(f).sum::<f64>() / chains as f64;
        rows.push(ScanRow {
            beta,
            m,
            bond_dev_sq: column(&|r| r.bond_dev_sq)?,
            jac_dev_sq: column(&|r| r.jac_dev_sq)?,
            defect_density: column(&|r| r.defect_count as f64 / sites)?,
            acceptance: [
                rate(&|g| g.tallies.displace.acceptance()),
                rate(&|g| g.tallies.create.acceptance()),
                rate(&|g| g.tallies.annihilate.acceptance()),
            ],
            delta: rate(&|g| g.delta),
        });
    }
    Ok(ScanTable { config: cfg.clone(), rows })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use super::*;
    use crate::configuration::SiteMove;
    use crate::geometry::dist_so2;
    use crate::lattice::LatticeTorus;
    use crate::potential::PotentialSpec;

    fn standard(n: usize, l: f64) -> Configuration<f64> {
        let lat = Arc::new(LatticeTorus::new(n).unwrap());
        Configuration::standard(lat, Arc::new(PotentialSpec::quadratic(100.0, 0.2, l, 20.0, 50.0)))
    }

    #[test]
    fn standard_config_measures_zero() {
        let c = standard(6, 1.01);
        let r = measure(&c, 0).unwrap();
        assert!(r.bond_dev_sq < 1e-28 && r.jac_dev_sq < 1e-28 && r.rigidity_sum < 1e-28);
        assert_eq!(r.defect_count, 0);
        let mut c1 = c.clone();
        c1.try_apply(&SiteMove::CreateDefect { site: 9 }).unwrap();
        let r1 = measure(&c1, 0).unwrap();
        assert!(r1.bond_dev_sq < 1e-28);
        assert_eq!(r1.defect_count, 1);
    }

    #[test]
    fn present_variant_equals_full_without_defects() {
        let lat = Arc::new(LatticeTorus::new(6).unwrap());
        let spec = Arc::new(PotentialSpec::quadratic(100.0, 0.2, 1.0, 20.0, 50.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut c = Configuration::near_standard_sample(lat, spec, 0.04, &mut rng).unwrap();
        let r = measure(&c, 0).unwrap();
        assert_eq!(r.bond_dev_sq, r.present_bond_dev_sq);
        c.try_apply(&SiteMove::CreateDefect { site: 20 }).unwrap();
        let r = measure(&c, 0).unwrap();
        assert!(r.present_bond_dev_sq <= r.bond_dev_sq);
    }

    #[test]
    fn rotation_field_frobenius_identity() {
        for &(l, th) in &[(1.0, 0.3), (0.97, -1.2), (1.05, 2.0)] {
            let m = Mat2::rotation(th) * l;
            let got = (m - Mat2::scaled_identity(l)).frobenius_sq();
            let want = 2.0 * l * l * (2.0 - 2.0 * f64::cos(th));
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn dist_bounded_by_distance_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let v: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let m = Mat2::new(v[0], v[1], v[2], v[3]);
            assert!(dist_so2(&m) <= (m - Mat2::identity()).frobenius() + 1e-12);
        }
    }

    #[test]
    fn constant_stream() {
        let s = estimate(&vec![2.5; 640]).unwrap();
        assert_eq!((s.mean, s.stderr, s.tau_int), (2.5, 0.0, 1.0));
        assert!(matches!(estimate(&[1.0; 99]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn gaussian_stderr_calibration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 3200;
        let reps = 100;
        let mean_se: f64 = (0..reps)
            .map(|_| {
                let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                estimate(&xs).unwrap().stderr
            })
            .sum::<f64>()
            / reps as f64;
        let target = 1.0 / (n as f64).sqrt();
        assert!((mean_se / target - 1.0).abs() < 0.2, "{mean_se} vs {target}");
    }

    #[test]
    fn ar1_tau_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let phi: f64 = 0.8;
        let tau = (1.0 + phi) / (1.0 - phi);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..400_000)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = phi * x + e;
                x
            })
            .collect();
        let s = estimate(&xs).unwrap();
        assert!((s.tau_int / tau - 1.0).abs() < 0.25, "{} vs {tau}", s.tau_int);
    }

    #[test]
    fn slope_and_monotonicity() {
        let x = [25.0, 50.0, 100.0, 200.0];
        let y: Vec<f64> = x.iter().map(|b| 3.0 / b).collect();
        assert!((log_log_slope(&x, &y) + 1.0).abs() < 1e-12);
        assert!(strictly_decreasing(&y));
        assert!(!strictly_decreasing(&[1.0, 1.0]));
        assert!(non_increasing(&[1.0, 1.0, 0.0]));
    }

    #[test]
    fn small_scan_trends() {
        let schedule = RunSchedule { burn_in: 200, sweeps: 1600, thin: 4 };
        let cfg = ScanConfig::quadratic(5, 100.0, vec![25.0, 50.0, 100.0, 200.0], vec![20.0], schedule, 3);
        let table = symmetry_breaking_scan(&cfg).unwrap();
        let rows = table.at_m(20.0);
        let jac: Vec<f64> = rows.iter().map(|r| r.jac_dev_sq.mean).collect();
        assert!(strictly_decreasing(&jac), "{jac:?}");
        let slope = table.bond_slope(20.0);
        assert!((-1.3..=-0.7).contains(&slope), "{slope}");
        assert!(rows.iter().all(|r| r.defect_density.mean == 0.0));
    }

    #[test]
    fn combine_adds_errors_in_quadrature() {
        let s = Summary { n: 100, mean: 1.0, stderr: 0.3, tau_int: 2.0, variance: 1.0 };
        let t = Summary { n: 100, mean: 3.0, stderr: 0.4, tau_int: 4.0, variance: 1.0 };
        let c = combine(&[s, t]);
        assert_eq!((c.n, c.mean, c.tau_int), (200, 2.0, 3.0));
        assert!((c.stderr - 0.25).abs() < 1e-15);
    }
}
