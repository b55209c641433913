//! Acceptance run. Each criterion prints its measurements, then one PASS/FAIL line; a
//! final block repeats the verdicts and the process exits nonzero if any failed.
//!
//! Criteria run one after another so each wall-clock budget is measured on its own.

use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use trilattice::energy::{delta_h, hamiltonian, DeltaH, Fault};
use trilattice::geometry::{best_rotation, dist_so2, uniform_disk};
use trilattice::harness::{identity_suite, inequality_suite, random_valid_config, SuiteConfig, FJM_SPREAD_TOL, IDENTITY_TOL};
use trilattice::lattice::SiteIndex;
use trilattice::observables::{
    combine, csv_header, log_log_slope, non_increasing, site_bond_means, strictly_decreasing, summarize,
    symmetry_breaking_scan, ObservableRecord, ScanConfig, Summary,
};
use trilattice::sampler::{
    detailed_balance_audit, BalanceAuditConfig, Chain, ChainParams, Checkpoint, MoveMix, RunSchedule,
};
use trilattice::{Configuration, LatticeTorus, Mat2, PotentialSpec, SiteMove};

struct Verdict {
    id: u8,
    title: &'static str,
    passed: bool,
    elapsed: Duration,
    budget: Duration,
}

fn report(id: u8, title: &'static str, budget_secs: u64, run: impl FnOnce() -> bool) -> Verdict {
    println!("--- criterion {id}: {title}");
    let t = Instant::now();
    let ok = run();
    let elapsed = t.elapsed();
    let budget = Duration::from_secs(budget_secs);
    let passed = ok && elapsed < budget;
    if ok && !passed {
        println!("    over budget: {:.1}s >= {budget_secs}s", elapsed.as_secs_f64());
    }
    let v = Verdict { id, title, passed, elapsed, budget };
    println!("{}", line(&v));
    v
}

fn line(v: &Verdict) -> String {
    format!(
        "{} criterion {}: {} ({:.1}s of {}s)",
        if v.passed { "PASS" } else { "FAIL" },
        v.id,
        v.title,
        v.elapsed.as_secs_f64(),
        v.budget.as_secs()
    )
}

fn check(ok: bool, what: impl AsRef<str>) -> bool {
    println!("    [{}] {}", if ok { "ok" } else { "FAILED" }, what.as_ref());
    ok
}

fn quad(kappa: f64, l: f64, m: f64, beta: f64) -> Arc<PotentialSpec<f64>> {
    Arc::new(PotentialSpec::quadratic(kappa, 0.2, l, m, beta))
}

fn torus(n: usize) -> Arc<LatticeTorus> {
    Arc::new(LatticeTorus::new(n).unwrap())
}

// ---------------------------------------------------------------------------------------
// 1. Exact identities

fn exact_identities() -> bool {
    let cfg = SuiteConfig::default();
    let r = identity_suite(&cfg).unwrap();
    let required = ["half-counting decomposition", "signed-area telescoping", "boundary/absent edge count", "mean jacobian"];
    let mut ok = true;
    for c in &r.checks {
        let needed = required.contains(&c.name);
        let tag = if needed { "" } else { " (supplementary)" };
        ok &= check(
            c.passed && c.samples == 3000 && c.tolerance <= IDENTITY_TOL,
            format!("{}{tag}: max relative residual {:.2e} over {} configs", c.name, c.max_residual, c.samples),
        );
    }
    ok &= check(required.iter().all(|n| r.checks.iter().any(|c| c.name == *n)), "all four required identities checked");
    let bad = identity_suite(&SuiteConfig { identity_samples: 100, fault: Fault::FlipBoundarySign, ..cfg }).unwrap();
    ok &= check(!bad.passed, "injected sign flip is detected");
    ok
}

// ---------------------------------------------------------------------------------------
// 2. Oracle equivalences

/// Minimize `sum_i w_i |M_i - R(theta)|_F^2` over a 3600-point angle grid, then refine by
/// bisecting the derivative `2 sum_i w_i ((a + d) sin - (c - b) cos)` inside the best cell.
fn grid_argmin(items: &[(Mat2<f64>, f64)]) -> f64 {
    let f = |t: f64| items.iter().map(|(m, w)| w * frob_sq(m, t)).sum::<f64>();
    let df = |t: f64| {
        let (s, c) = t.sin_cos();
        items.iter().map(|(m, w)| w * ((m.a + m.d) * s - (m.c - m.b) * c)).sum::<f64>()
    };
    let k = 3600;
    let step = std::f64::consts::TAU / k as f64;
    let best = (0..k).map(|i| i as f64 * step).min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
    let (mut lo, mut hi) = (best - step, best + step);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if df(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn frob_sq(m: &Mat2<f64>, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    (m.a - c).powi(2) + (m.b + s).powi(2) + (m.c - s).powi(2) + (m.d - c).powi(2)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, scale: f64) -> Mat2<f64> {
    let mut g = || scale * rng.sample::<f64, _>(StandardNormal);
    Mat2::new(g(), g(), g(), g())
}

/// Brute-force energy: ordered pairs of present sites, neighbors found by trying the nine
/// periodic images of the second site.
fn pair_loop_energy(c: &Configuration<f64>) -> f64 {
    const STEPS: [(i64, i64); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];
    let n = c.n() as i64;
    let l = c.spec().l;
    let plane = |p: i64, q: i64| [l * (p as f64 + 0.5 * q as f64), l * (q as f64 * 3f64.sqrt() / 2.0)];
    let mut sites = Vec::new();
    for q in 0..n {
        for p in 0..n {
            let s = c.lattice().site_index(SiteIndex::new(p, q));
            if let Some(w) = c.position(s) {
                sites.push((p, q, w));
            }
        }
    }
    let mut h = 0.0;
    for &(pi, qi, wi) in &sites {
        for &(pj, qj, wj) in &sites {
            for wp in -1..=1 {
                for wq in -1..=1 {
                    let off = (pj + wp * n - pi, qj + wq * n - qi);
                    if STEPS.contains(&off) {
                        let shift = plane(wp * n, wq * n);
                        let r = (wj.x + shift[0] - wi.x).hypot(wj.y + shift[1] - wi.y);
                        h += 0.5 * c.spec().eval_v(r).unwrap();
                    }
                }
            }
        }
    }
    h + c.spec().m * c.defect_count() as f64
}

fn oracle_equivalences() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut ok = true;

    let (mut worst, mut negative) = (0.0f64, 0);
    for i in 0..10_000 {
        let m = gaussian_matrix(&mut rng, if i % 2 == 0 { 1.0 } else { 0.3 });
        negative += (m.det() < 0.0) as usize;
        let theta = grid_argmin(&[(m, 1.0)]);
        worst = worst.max((dist_so2(&m) - frob_sq(&m, theta).sqrt()).abs());
    }
    ok &= check(
        worst <= 1e-6 && negative > 1000,
        format!("dist to SO(2) vs angle grid: max |diff| {worst:.2e} on 10^4 matrices ({negative} with det < 0)"),
    );

    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let k = rng.gen_range(1..=6);
        let items: Vec<(Mat2<f64>, f64)> =
            (0..k).map(|_| (gaussian_matrix(&mut rng, 1.0), rng.gen_range(0.1..2.0))).collect();
        let theta = grid_argmin(&items);
        let r = best_rotation(&items).unwrap();
        worst = worst.max((r - Mat2::rotation(theta)).frobenius());
    }
    ok &= check(worst <= 1e-6, format!("best rotation vs angle grid: max |R - R_grid| {worst:.2e} on 10^4 sets"));

    let (mut worst, mut moves, mut rejects, mut disagreements) = (0.0f64, 0, 0, 0);
    let spec = quad(100.0, 1.0, 20.0, 50.0);
    while moves < 10_000 {
        let n = 5 + moves % 3;
        let mut c = random_valid_config(torus(n), spec.clone(), 0.04, rng.gen_range(0..=3), &mut rng).unwrap();
        for _ in 0..50 {
            let site = rng.gen_range(0..n * n);
            let mv = match rng.gen_range(0..3) {
                0 => SiteMove::Displace { site, to: c.displacement(site) + uniform_disk(&mut rng, 0.06) },
                1 => SiteMove::CreateDefect { site },
                _ => match c.fill_hole_value(site) {
                    Ok(fill) => SiteMove::AnnihilateDefect { site, to: fill + uniform_disk(&mut rng, 0.05) },
                    Err(_) => continue,
                },
            };
            let before = hamiltonian(&c).unwrap().total;
            let predicted = delta_h(&c, &mv);
            let mut next = c.clone();
            // The sampler asks for the energy change only after the hard-core check passes.
            match (next.try_apply(&mv), predicted) {
                (Ok(()), DeltaH::Finite(d)) => {
                    let after = hamiltonian(&next).unwrap().total;
                    worst = worst.max((d - (after - before)).abs());
                    moves += 1;
                    c = next;
                }
                (Ok(()), DeltaH::HardReject) => disagreements += 1,
                (Err(_), _) => rejects += 1,
            }
        }
    }
    ok &= check(
        worst <= 1e-12 && disagreements == 0,
        format!(
            "local energy change vs full recompute: max |diff| {worst:.2e} over {moves} admissible moves ({rejects} inadmissible skipped, {disagreements} wrongly rejected)"
        ),
    );

    let mut worst = 0.0f64;
    for i in 0..200 {
        let n = 5 + i % 4;
        let sp = quad(100.0, 1.0 + 0.01 * (i % 3) as f64, 20.0, 50.0);
        let c = random_valid_config(torus(n), sp, 0.045, i % 4, &mut rng).unwrap();
        worst = worst.max((hamiltonian(&c).unwrap().total - pair_loop_energy(&c)).abs());
    }
    ok &= check(worst <= 1e-12, format!("Hamiltonian vs periodic pair loop: max |diff| {worst:.2e} on 200 configs"));
    ok
}

// ---------------------------------------------------------------------------------------
// 3. Sampler correctness

fn sampler_correctness() -> bool {
    let mut ok = true;
    let audit = detailed_balance_audit(&BalanceAuditConfig::default()).unwrap();
    ok &= check(
        audit.tv <= 0.02 && audit.states == 442 && audit.config.steps >= 10_000_000,
        format!(
            "single-site conditional, {} states, {} steps: TV {:.4} (hole exact {:.4}, empirical {:.4}), max flow asymmetry z {:.2}",
            audit.states, audit.config.steps, audit.tv, audit.hole_exact, audit.hole_empirical, audit.max_flow_z
        ),
    );

    let n = 6;
    let sweeps = 3000;
    for (i, &beta) in [10.0, 50.0, 200.0].iter().enumerate() {
        for (j, &m) in [0.1, 2.0, 20.0].iter().enumerate() {
            let start = Configuration::standard(torus(n), quad(100.0, 1.0, m, beta));
            let mut chain = Chain::new(start, ChainParams::continuous(0.2), 31, (3 * i + j) as u64).unwrap();
            let (mut bad, mut with_defects, mut max_defects) = (0, 0, 0);
            for _ in 0..sweeps {
                chain.sweep().unwrap();
                bad += !chain.config().check_constraints().all_ok() as usize;
                let d = chain.config().defect_count();
                with_defects += (d > 0) as usize;
                max_defects = max_defects.max(d);
            }
            chain.audit().unwrap();
            ok &= check(
                bad == 0 && chain.steps() >= 100_000,
                format!(
                    "beta {beta:>5}, m {m:>4}: {} steps, {sweeps} snapshots, {bad} violations, {with_defects} with defects (max {max_defects})",
                    chain.steps()
                ),
            );
        }
    }
    ok
}

// ---------------------------------------------------------------------------------------
// 4. Mean bond vectors

fn run_chains(
    spec: Arc<PotentialSpec<f64>>,
    n: usize,
    params: ChainParams,
    schedule: RunSchedule,
    chains: u64,
    seed: u64,
) -> Vec<Vec<ObservableRecord>> {
    (0..chains)
        .map(|s| {
            let start = Configuration::standard(torus(n), spec.clone());
            Chain::new(start, params, seed, s).unwrap().run(&schedule).unwrap()
        })
        .collect()
}

fn mean_bond_vectors() -> bool {
    let l = 1.0;
    let runs = run_chains(
        quad(100.0, l, 20.0, 100.0),
        6,
        ChainParams::continuous(0.2),
        RunSchedule { burn_in: 1000, sweeps: 20_000, thin: 5 },
        4,
        41,
    );
    let per_chain: Vec<[[Summary; 2]; 6]> = runs.iter().map(|r| site_bond_means(r).unwrap()).collect();
    let h = 3f64.sqrt() / 2.0;
    let expected = [[1.0, 0.0], [0.5, h], [-0.5, h], [-1.0, 0.0], [-0.5, -h], [0.5, -h]];
    let mut ok = true;
    for (j, e) in expected.iter().enumerate() {
        let s: Vec<Summary> = (0..2).map(|k| combine(&per_chain.iter().map(|c| c[j][k]).collect::<Vec<_>>())).collect();
        let z: Vec<f64> = (0..2).map(|k| (s[k].mean - l * e[k]) / s[k].stderr).collect();
        ok &= check(
            z.iter().all(|z| z.abs() <= 3.0) && s.iter().all(|s| s.stderr < 0.01 * l),
            format!(
                "direction {j}: mean ({:+.6}, {:+.6}) vs ({:+.6}, {:+.6}), stderr ({:.1e}, {:.1e}), z ({:+.2}, {:+.2})",
                s[0].mean, s[1].mean, l * e[0], l * e[1], s[0].stderr, s[1].stderr, z[0], z[1]
            ),
        );
    }
    ok
}

// ---------------------------------------------------------------------------------------
// 5. Trends in beta and m

/// Harmonic prediction on the defect-free `n`-torus with `V = kappa/2 (r - 1)^2`, `l = 1`:
/// `(E[bond_dev_sq] * beta, number of zero modes)`.
fn harmonic_bond_deviation(n: usize, kappa: f64) -> (f64, usize) {
    let dim = 2 * n * n;
    let idx = |p: usize, q: usize| (q % n) * n + (p % n);
    let dirs = [[1.0, 0.0], [0.5, 3f64.sqrt() / 2.0], [-0.5, 3f64.sqrt() / 2.0]];
    let steps = [(1, 0), (0, 1), (n - 1, 1)];
    let mut edges = Vec::new();
    for q in 0..n {
        for p in 0..n {
            for (k, (dp, dq)) in steps.iter().enumerate() {
                edges.push((idx(p, q), idx(p + dp, q + dq), dirs[k]));
            }
        }
    }
    let mut hess = DMatrix::<f64>::zeros(dim, dim);
    for &(a, b, e) in &edges {
        for x in 0..2 {
            for y in 0..2 {
                let v = kappa * e[x] * e[y];
                hess[(2 * a + x, 2 * a + y)] += v;
                hess[(2 * b + x, 2 * b + y)] += v;
                hess[(2 * a + x, 2 * b + y)] -= v;
                hess[(2 * b + x, 2 * a + y)] -= v;
            }
        }
    }
    let eig = SymmetricEigen::new(hess);
    let scale = eig.eigenvalues.amax();
    let mut pinv = DMatrix::<f64>::zeros(dim, dim);
    let mut zero_modes = 0;
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() < 1e-10 * scale {
            zero_modes += 1;
            continue;
        }
        let v = eig.eigenvectors.column(i);
        pinv += v * v.transpose() / lam;
    }
    let mut total = 0.0;
    for &(a, b, _) in &edges {
        for x in 0..2 {
            let (i, j) = (2 * a + x, 2 * b + x);
            total += pinv[(i, i)] + pinv[(j, j)] - 2.0 * pinv[(i, j)];
        }
    }
    (total / edges.len() as f64, zero_modes)
}

fn mean_of(runs: &[Vec<ObservableRecord>], name: &str) -> Summary {
    let parts: Vec<Summary> = runs
        .iter()
        .map(|r| summarize(r).unwrap().into_iter().find(|(k, _)| *k == name).unwrap().1)
        .collect();
    combine(&parts)
}

fn beta_and_m_trends() -> bool {
    let mut ok = true;
    let schedule = RunSchedule { burn_in: 2000, sweeps: 40_000, thin: 10 };
    let betas = vec![25.0, 50.0, 100.0, 200.0];
    let scan = symmetry_breaking_scan(&ScanConfig {
        chains: 2,
        ..ScanConfig::quadratic(6, 100.0, betas.clone(), vec![20.0], schedule, 51)
    })
    .unwrap();
    let rows = scan.at_m(20.0);
    for r in &rows {
        println!(
            "    beta {:>5}: bond_dev_sq {:.5e} +- {:.1e}, jac_dev_sq {:.5e} +- {:.1e}",
            r.beta, r.bond_dev_sq.mean, r.bond_dev_sq.stderr, r.jac_dev_sq.mean, r.jac_dev_sq.stderr
        );
    }
    let bond: Vec<f64> = rows.iter().map(|r| r.bond_dev_sq.mean).collect();
    let jac: Vec<f64> = rows.iter().map(|r| r.jac_dev_sq.mean).collect();
    ok &= check(strictly_decreasing(&bond), "bond_dev_sq strictly decreasing in beta");
    ok &= check(strictly_decreasing(&jac), "jac_dev_sq strictly decreasing in beta");
    let slope = log_log_slope(&betas, &bond);
    ok &= check((-1.2..=-0.8).contains(&slope), format!("log-log slope of bond_dev_sq vs beta {slope:.4} in [-1.2, -0.8]"));

    // Harmonic oracle on the 4-torus: the linearized model predicts exactly 1/beta decay.
    let n = 4;
    let (pred, zero_modes) = harmonic_bond_deviation(n, 100.0);
    ok &= check(zero_modes == 2, format!("harmonic model: {zero_modes} zero modes (the two translations)"));
    let params = ChainParams { mix: MoveMix { displace: 1.0, create: 0.0, annihilate: 0.0 }, ..ChainParams::continuous(0.2) };
    let mut mc = Vec::new();
    let obetas = [200.0, 800.0];
    for (i, &beta) in obetas.iter().enumerate() {
        let runs = run_chains(quad(100.0, 1.0, 20.0, beta), n, params, RunSchedule { burn_in: 2000, sweeps: 60_000, thin: 5 }, 2, 52 + i as u64);
        let bond = mean_of(&runs, "bond_dev_sq");
        let gap = mean_of(&runs, "energy_gap");
        let (hb, hg) = (pred / beta, (2 * n * n - 2) as f64 / (2.0 * beta));
        ok &= check(
            (bond.mean - hb).abs() <= 4.0 * bond.stderr,
            format!("N=4, beta {beta}: bond_dev_sq {:.5e} +- {:.1e} vs harmonic {hb:.5e}", bond.mean, bond.stderr),
        );
        ok &= check(
            (gap.mean - hg).abs() <= 4.0 * gap.stderr,
            format!("N=4, beta {beta}: energy gap {:.5e} +- {:.1e} vs equipartition {hg:.5e}", gap.mean, gap.stderr),
        );
        mc.push(bond.mean);
    }
    let oslope = log_log_slope(&obetas, &mc);
    ok &= check((-1.2..=-0.8).contains(&oslope), format!("N=4 sampled slope {oslope:.4} against harmonic -1"));

    let dens = |ms: Vec<f64>, seed: u64| -> Vec<(f64, Summary)> {
        let t = symmetry_breaking_scan(&ScanConfig {
            chains: 2,
            ..ScanConfig::quadratic(6, 100.0, vec![100.0], ms.clone(), RunSchedule { burn_in: 2000, sweeps: 20_000, thin: 10 }, seed)
        })
        .unwrap();
        ms.iter().map(|&m| (m, t.at_m(m)[0].defect_density)).collect()
    };
    let coarse = dens(vec![10.0, 20.0, 40.0], 53);
    for (m, d) in &coarse {
        println!("    beta 100, m {m:>4}: defect density {:.3e} +- {:.1e}", d.mean, d.stderr);
    }
    let y: Vec<f64> = coarse.iter().map(|(_, d)| d.mean).collect();
    ok &= check(non_increasing(&y), "defect density non-increasing over m in {10, 20, 40}");
    let fine = dens(vec![0.05, 0.1, 0.15, 0.2], 54);
    for (m, d) in &fine {
        println!("    beta 100, m {m:>4}: defect density {:.3e} +- {:.1e}", d.mean, d.stderr);
    }
    let y: Vec<f64> = fine.iter().map(|(_, d)| d.mean).collect();
    ok &= check(
        strictly_decreasing(&y) && y.iter().all(|&v| v > 0.0),
        "defect density strictly decreasing over m in {0.05, 0.1, 0.15, 0.2}, where defects occur",
    );
    ok
}

// ---------------------------------------------------------------------------------------
// 6. Rigidity suite

fn rigidity_suite() -> bool {
    let cfg = SuiteConfig::default();
    let r = inequality_suite(&cfg).unwrap();
    let mut ok = true;
    for p in &r.points {
        for c in [&p.energy_rigidity, &p.global_rigidity] {
            ok &= check(
                c.passed && c.min > 0.0 && c.samples + c.skipped == cfg.sampled_configs,
                format!(
                    "beta {}, m {}, l {}: {} min ratio {:.4e} over {} configs ({} with defects, fitted defect constant {:?})",
                    p.point.beta, p.point.m, p.point.l, c.name, c.min, c.samples, p.defect_configs, p.c9_fit
                ),
            );
        }
    }
    ok &= check(r.points.iter().any(|p| p.defect_configs > 0), "some sampled configurations carry defects");
    for c in [&r.side_lengths, &r.single_triangle] {
        ok &= check(
            c.passed && c.min > 0.0 && c.samples >= 100_000,
            format!("{}: ratio range [{:.4e}, {:.4e}] over {} synthetic triangles", c.name, c.min, c.max, c.samples),
        );
    }
    for c in [&r.defect_layer, &r.present_triangles] {
        ok &= check(c.passed, format!("{}: ratio range [{:.4e}, {:.4e}] over {} configs", c.name, c.min, c.max, c.samples));
    }
    ok &= check(r.degenerate_layer.passed, "rotated second layer forces a rotated first layer");
    for row in &r.fjm {
        println!("    N {:>2}: max ratio {:.6}, mean {:.6} over {} fields", row.n, row.max_ratio, row.mean_ratio, row.samples);
    }
    ok &= check(
        r.fjm_spread <= FJM_SPREAD_TOL && r.fjm.iter().map(|f| f.n).eq([5, 8, 12]),
        format!("per-size maxima spread {:.4} <= {FJM_SPREAD_TOL}", r.fjm_spread),
    );
    ok
}

// ---------------------------------------------------------------------------------------
// 7. Reproducibility

fn csv(records: &[ObservableRecord]) -> String {
    let mut s = csv_header();
    for r in records {
        s.push_str(&r.csv_row());
    }
    s
}

fn fresh_chain() -> Chain<f64> {
    let start = Configuration::standard(torus(6), quad(100.0, 1.0, 0.15, 100.0));
    Chain::new(start, ChainParams::continuous(0.2), 71, 0).unwrap()
}

fn reproducibility() -> bool {
    let schedule = RunSchedule { burn_in: 200, sweeps: 2000, thin: 4 };
    let mut a = fresh_chain();
    let ra = a.run(&schedule).unwrap();
    let mut b = fresh_chain();
    let rb = b.run(&schedule).unwrap();
    let cp_json = |c: &Chain<f64>| serde_json::to_string(&c.checkpoint()).unwrap();
    let defects = ra.iter().filter(|r| r.defect_count > 0).count();
    let mut ok = check(
        csv(&ra) == csv(&rb) && cp_json(&a) == cp_json(&b),
        format!("two runs: identical CSV ({} bytes, {} rows, {defects} with defects) and checkpoints", csv(&ra).len(), ra.len()),
    );

    let dir = tempfile::tempdir().unwrap();
    for cut in [7, 150, 200, 733, 2199] {
        let mut first = fresh_chain();
        let mut rows = Vec::new();
        first
            .run_until(&schedule, cut, |r| {
                rows.push(r);
                Ok(())
            })
            .unwrap();
        let path = dir.path().join(format!("cut{cut}.json"));
        first.checkpoint().write(&path).unwrap();
        let mut resumed = Chain::from_checkpoint(&Checkpoint::read(&path).unwrap()).unwrap();
        resumed
            .run_until(&schedule, u64::MAX, |r| {
                rows.push(r);
                Ok(())
            })
            .unwrap();
        ok &= check(
            rows == ra && cp_json(&resumed) == cp_json(&a) && resumed.config().to_snapshot() == a.config().to_snapshot(),
            format!("resume after sweep {cut}: records and final state bit-identical"),
        );
    }
    ok
}

fn main() {
    println!("acceptance run");
    let verdicts = [
        report(1, "exact identities", 120, exact_identities),
        report(2, "oracle equivalences", 120, oracle_equivalences),
        report(3, "sampler correctness", 600, sampler_correctness),
        report(4, "mean bond vectors", 600, mean_bond_vectors),
        report(5, "beta and m trends", 1800, beta_and_m_trends),
        report(6, "rigidity suite", 900, rigidity_suite),
        report(7, "reproducibility", 600, reproducibility),
    ];
    println!("=== summary");
    for v in &verdicts {
        println!("{}", line(v));
    }
    if verdicts.iter().any(|v| !v.passed) {
        std::process::exit(1);
    }
}

