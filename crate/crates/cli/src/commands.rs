use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use trilattice::energy::Fault;
use trilattice::harness::{identity_suite, inequality_suite, IdentityReport, InequalityReport, Report, SuiteConfig};
use trilattice::observables::{combine, estimate, symmetry_breaking_scan, ScanConfig, Summary, MIN_SAMPLES};
use trilattice::potential::{read_table, Spline};
use trilattice::sampler::{Chain, ChainParams, Checkpoint, MoveMix, Proposal, RunSchedule, Tallies, DEFAULT_AUDIT_EVERY};
use trilattice::{Configuration, LatticeTorus, PotentialKind, PotentialSpec};

use crate::config::Config;
use crate::output::{num, preamble, write_json, SampleWriter, Stopwatch, WallClock, SAMPLE_COLUMNS};
use crate::CliError;

/// Stream offset for the RNG that draws a randomized initial configuration, keeping it
/// apart from the chain streams `0..chains`.
const INIT_STREAM: u64 = 1 << 32;

fn potential(cfg: &Config, beta: f64, m: f64) -> Result<PotentialSpec<f64>, CliError> {
    let alpha = cfg.get("sim.alpha", Some(0.2))?;
    let l = cfg.get("sim.l", Some(1.0))?;
    let kind: String = cfg.get("potential.kind", Some("quadratic".to_string()))?;
    let kind = match kind.as_str() {
        "quadratic" => PotentialKind::Quadratic { kappa: cfg.get("potential.kappa", Some(100.0))? },
        "tabulated" => {
            let path = cfg
                .path_opt("potential.table")
                .ok_or_else(|| cfg.invalid("potential.table", "a tabulated potential needs a table file"))?;
            let knots = read_table(&path).map_err(|e| cfg.invalid("potential.table", e))?;
            PotentialKind::Tabulated(Spline::new(&knots).map_err(|e| cfg.invalid("potential.table", e))?)
        }
        other => return Err(cfg.invalid("potential.kind", format!("expected `quadratic` or `tabulated`, got `{other}`"))),
    };
    let spec = PotentialSpec { kind, alpha, l, m, beta };
    let report = spec.validate();
    if let Some(fail) = report.failures().next() {
        let key = match fail.assumption {
            3 => "sim.l",
            1 | 2 => "potential.kind",
            _ => "sim.alpha",
        };
        return Err(cfg.invalid(
            key,
            format!("assumption {} ({}) failed: {}", fail.assumption, fail.name, fail.detail),
        ));
    }
    Ok(spec)
}

fn chain_params(cfg: &Config, alpha: f64) -> Result<ChainParams, CliError> {
    let mix = MoveMix {
        displace: cfg.get("moves.p_displace", Some(0.9))?,
        create: cfg.get("moves.p_create", Some(0.05))?,
        annihilate: cfg.get("moves.p_annihilate", Some(0.05))?,
    };
    mix.validate().map_err(|e| cfg.invalid("moves.p_displace", e))?;
    let Proposal::Continuous { delta, rho } = Proposal::continuous_for(alpha) else { unreachable!() };
    let proposal = Proposal::Continuous {
        delta: cfg.get("moves.delta", Some(delta))?,
        rho: cfg.get("moves.rho", Some(rho))?,
    };
    Ok(ChainParams {
        mix,
        proposal,
        audit_every: cfg.get("moves.audit_every", Some(DEFAULT_AUDIT_EVERY))?,
        tune: cfg.get("moves.tune", Some(true))?,
        ..ChainParams::continuous(alpha)
    })
}

fn schedule(cfg: &Config) -> Result<RunSchedule, CliError> {
    let s = RunSchedule {
        burn_in: cfg.get("run.burn_in", Some(0))?,
        sweeps: cfg.get("run.sweeps", None)?,
        thin: cfg.get("run.thin", Some(1))?,
    };
    s.validate().map_err(|e| cfg.invalid("run.thin", e))?;
    Ok(s)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn summaries(columns: &[[f64; 5]]) -> BTreeMap<&'static str, Option<Summary>> {
    SAMPLE_COLUMNS
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let xs: Vec<f64> = columns.iter().map(|row| row[j]).collect();
            (*name, if xs.len() >= MIN_SAMPLES { estimate(&xs).ok() } else { None })
        })
        .collect()
}

#[derive(Serialize)]
struct ChainSummary {
    chain: usize,
    stream: u64,
    samples_file: String,
    checkpoint_file: String,
    rows: usize,
    sweeps_done: u64,
    steps: u64,
    completed: bool,
    delta: f64,
    tallies: Tallies,
    acceptance: [f64; 3],
    observables: BTreeMap<&'static str, Option<Summary>>,
}

#[derive(Serialize)]
struct SimulationSummary {
    schema: &'static str,
    version: &'static str,
    seed: u64,
    parameters: BTreeMap<String, String>,
    chains: Vec<ChainSummary>,
    combined: Option<BTreeMap<&'static str, Option<Summary>>>,
    resumed_from: Option<String>,
    wall_clock: WallClock,
}

struct Plan {
    seed: u64,
    schedule: RunSchedule,
    stop_after: u64,
    out: PathBuf,
    preamble: Vec<String>,
}

fn file_names(chains: usize, i: usize) -> (String, String) {
    if chains == 1 {
        ("samples.csv".into(), "checkpoint.json".into())
    } else {
        (format!("samples_chain{i}.csv"), format!("checkpoint_chain{i}.json"))
    }
}

fn run_chain(plan: &Plan, mut chain: Chain<f64>, i: usize, chains: usize, resumed: bool) -> Result<ChainSummary, CliError> {
    let (samples_file, checkpoint_file) = file_names(chains, i);
    let samples_path = plan.out.join(&samples_file);
    let pre = &plan.preamble[i];
    let mut writer = if resumed {
        let last = chain.sweeps_done().saturating_sub(plan.schedule.burn_in);
        SampleWriter::resume(&samples_path, pre, last)?
    } else {
        SampleWriter::create(&samples_path, pre)?
    };
    chain.run_until(&plan.schedule, plan.stop_after, |rec| {
        writer.push(&rec).map_err(|e| trilattice::Error::InvalidParameter(e.to_string()))
    })?;
    let columns = writer.finish()?;
    chain.checkpoint().write(&plan.out.join(&checkpoint_file))?;
    let t = *chain.tallies();
    Ok(ChainSummary {
        chain: i,
        stream: i as u64,
        samples_file,
        checkpoint_file,
        rows: columns.len(),
        sweeps_done: chain.sweeps_done(),
        steps: chain.steps(),
        completed: chain.sweeps_done() >= plan.schedule.total(),
        delta: chain.delta(),
        tallies: t,
        acceptance: [t.displace.acceptance(), t.create.acceptance(), t.annihilate.acceptance()],
        observables: summaries(&columns),
    })
}

pub fn simulate(path: &Path) -> Result<(), CliError> {
    let clock = Stopwatch::start();
    let cfg = Config::load(path)?;
    let n: usize = cfg.get("sim.N", None)?;
    let beta = cfg.get("sim.beta", None)?;
    let m = cfg.get("sim.m", None)?;
    let spec = Arc::new(potential(&cfg, beta, m)?);
    let params = chain_params(&cfg, spec.alpha)?;
    let chains: usize = cfg.get("sim.chains", Some(1))?;
    if chains == 0 {
        return Err(cfg.invalid("sim.chains", "need at least one chain"));
    }
    let seed: u64 = cfg.get("run.seed", None)?;
    let schedule = schedule(&cfg)?;
    let init: String = cfg.get("sim.init", Some("standard".to_string()))?;
    let init_r: Option<f64> = match init.as_str() {
        "standard" => None,
        "near_standard" => Some(cfg.get("sim.init_r", Some(spec.alpha / 8.0))?),
        other => return Err(cfg.invalid("sim.init", format!("expected `standard` or `near_standard`, got `{other}`"))),
    };
    let stop_after: u64 = cfg.opt("run.stop_after")?.unwrap_or(u64::MAX);
    let resume = cfg.path_opt("run.resume");
    if resume.is_some() && chains > 1 {
        return Err(cfg.invalid("run.resume", "resuming is supported for a single chain only"));
    }
    let lattice = Arc::new(LatticeTorus::new(n).map_err(|e| cfg.invalid("sim.N", e))?);
    params.validate(spec.alpha, lattice.num_sites()).map_err(|e| cfg.invalid("moves.delta", e))?;

    let params_echo = cfg.effective();
    let out = cfg.out_dir();
    create_dir(&out)?;
    let plan = Plan {
        seed,
        schedule,
        stop_after,
        out,
        preamble: (0..chains)
            .map(|i| {
                let extra: Vec<(&str, String)> = if chains > 1 { vec![("chain", i.to_string())] } else { vec![] };
                preamble(&params_echo, &extra)
            })
            .collect(),
    };

    let make = |i: usize| -> Result<Chain<f64>, CliError> {
        let start = match init_r {
            None => Configuration::standard(lattice.clone(), spec.clone()),
            Some(r) => {
                let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
                rng.set_stream(INIT_STREAM + i as u64);
                Configuration::near_standard_sample(lattice.clone(), spec.clone(), r, &mut rng)
                    .map_err(|e| cfg.invalid("sim.init_r", e))?
            }
        };
        Ok(Chain::new(start, params, plan.seed, i as u64)?)
    };

    let results: Vec<ChainSummary> = if let Some(cp_path) = &resume {
        let cp = Checkpoint::read(cp_path).map_err(|e| cfg.invalid("run.resume", e))?;
        let chain = Chain::from_checkpoint(&cp).map_err(|e| cfg.invalid("run.resume", e))?;
        check_resume(&cfg, &chain, &cp, seed, &spec)?;
        vec![run_chain(&plan, chain, 0, 1, true)?]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..chains)
                .map(|i| {
                    let (plan, make) = (&plan, &make);
                    scope.spawn(move || run_chain(plan, make(i)?, i, chains, false))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect::<Result<Vec<_>, _>>()
        })?
    };

    let combined = (chains > 1).then(|| {
        SAMPLE_COLUMNS
            .iter()
            .map(|name| {
                let parts: Option<Vec<Summary>> = results.iter().map(|c| c.observables[name]).collect();
                (*name, parts.map(|p| combine(&p)))
            })
            .collect()
    });
    let summary = SimulationSummary {
        schema: "trilattice-summary/1",
        version: env!("CARGO_PKG_VERSION"),
        seed,
        parameters: params_echo,
        chains: results,
        combined,
        resumed_from: resume.map(|p| p.display().to_string()),
        wall_clock: clock.read(),
    };
    write_json(&plan.out.join("summary.json"), &summary)
}

/// A checkpoint must come from a run with the same seed, lattice and potential.
fn check_resume(
    cfg: &Config,
    chain: &Chain<f64>,
    cp: &Checkpoint,
    seed: u64,
    spec: &PotentialSpec<f64>,
) -> Result<(), CliError> {
    let expected = trilattice::sampler::RngState::capture(&ChaCha8Rng::seed_from_u64(seed));
    if cp.rng.seed != expected.seed || cp.rng.stream != 0 {
        return Err(cfg.invalid("run.resume", format!("checkpoint was not written by a run with run.seed = {seed}")));
    }
    let c = chain.config();
    let theirs = c.spec();
    if c.n() != cfg.get::<usize>("sim.N", None)?
        || theirs.alpha != spec.alpha
        || theirs.l != spec.l
        || theirs.m != spec.m
        || theirs.beta != spec.beta
        || theirs.kind != spec.kind
    {
        return Err(cfg.invalid("run.resume", "checkpoint was written for a different lattice or potential"));
    }
    Ok(())
}

#[derive(Serialize)]
struct EmpiricalConstants {
    /// `[min, max]` of each sampled ratio; positive minima are the empirical constants.
    side_length_equivalence: [f64; 2],
    single_triangle_energy: [f64; 2],
    defect_layer: [f64; 2],
    present_triangles: [f64; 2],
    /// Largest gradient-to-rotation ratio per torus size.
    fjm_constant: BTreeMap<usize, f64>,
    /// Fitted defect constant per sampled parameter point, before the safety margin.
    defect_constant: Vec<Option<f64>>,
    defect_cost: f64,
}

#[derive(Serialize)]
struct VerifyBody {
    passed: bool,
    identities: IdentityReport,
    inequalities: InequalityReport,
    empirical_constants: EmpiricalConstants,
    wall_clock: WallClock,
}

pub fn verify(path: &Path) -> Result<(), CliError> {
    let clock = Stopwatch::start();
    let cfg = Config::load(path)?;
    let d = SuiteConfig::default();
    let fault: String = cfg.get("verify.fault", Some("none".to_string()))?;
    let fault = match fault.as_str() {
        "none" => Fault::None,
        "flip_boundary_sign" => Fault::FlipBoundarySign,
        other => return Err(cfg.invalid("verify.fault", format!("expected `none` or `flip_boundary_sign`, got `{other}`"))),
    };
    let suite = SuiteConfig {
        seed: cfg.get("run.seed", Some(d.seed))?,
        kappa: cfg.get("potential.kappa", Some(d.kappa))?,
        alpha: cfg.get("sim.alpha", Some(d.alpha))?,
        identity_sizes: cfg.list("verify.identity_sizes", Some(d.identity_sizes))?,
        identity_samples: cfg.get("verify.identity_samples", Some(d.identity_samples))?,
        sampled_configs: cfg.get("verify.sampled_configs", Some(d.sampled_configs))?,
        synthetic_samples: cfg.get("verify.synthetic_samples", Some(d.synthetic_samples))?,
        layer_samples: cfg.get("verify.layer_samples", Some(d.layer_samples))?,
        fjm_sizes: cfg.list("verify.fjm_sizes", Some(d.fjm_sizes))?,
        fjm_samples: cfg.get("verify.fjm_samples", Some(d.fjm_samples))?,
        fault,
        ..d
    };
    // Validates alpha and kappa against the standing assumptions for every sampled point.
    for p in &suite.points {
        let spec = PotentialSpec::quadratic(suite.kappa, suite.alpha, p.l, p.m, p.beta);
        if let Err(e) = spec.validate().into_result() {
            return Err(cfg.invalid("sim.alpha", e));
        }
    }
    let out = cfg.out_dir();
    create_dir(&out)?;

    let (identities, inequalities) = std::thread::scope(|scope| {
        let ids = scope.spawn(|| identity_suite(&suite));
        let ineq = inequality_suite(&suite);
        (ids.join().expect("identity suite panicked"), ineq)
    });
    let (identities, inequalities) = (identities?, inequalities?);
    let range = |c: &trilattice::harness::RatioCheck| [c.min, c.max];
    let empirical_constants = EmpiricalConstants {
        side_length_equivalence: range(&inequalities.side_lengths),
        single_triangle_energy: range(&inequalities.single_triangle),
        defect_layer: range(&inequalities.defect_layer),
        present_triangles: range(&inequalities.present_triangles),
        fjm_constant: inequalities.fjm.iter().map(|r| (r.n, r.max_ratio)).collect(),
        defect_constant: inequalities.points.iter().map(|p| p.c9_fit).collect(),
        defect_cost: inequalities.defect_probe.cost_per_defect,
    };
    let passed = identities.passed && inequalities.passed;
    let failures: Vec<String> = identities
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} residual {:e} > {:e}", c.name, c.max_residual, c.tolerance))
        .collect();
    let report = Report::new(
        suite.seed,
        &suite,
        VerifyBody { passed, identities, inequalities, empirical_constants, wall_clock: clock.read() },
    );
    write_json(&out.join("report.json"), &report)?;
    if passed {
        Ok(())
    } else if failures.is_empty() {
        Err(CliError::Verification("an inequality check failed; see report.json".into()))
    } else {
        Err(CliError::Verification(failures.join("; ")))
    }
}

pub fn scan(path: &Path) -> Result<(), CliError> {
    let clock = Stopwatch::start();
    let cfg = Config::load(path)?;
    let n: usize = cfg.get("sim.N", Some(6))?;
    let betas: Vec<f64> = cfg.list("scan.betas", Some(vec![25.0, 50.0, 100.0, 200.0]))?;
    let ms: Vec<f64> = cfg.list("scan.ms", Some(vec![20.0]))?;
    let kind: String = cfg.get("potential.kind", Some("quadratic".to_string()))?;
    if kind != "quadratic" {
        return Err(cfg.invalid("potential.kind", "scans support the quadratic potential only"));
    }
    for &b in &betas {
        for &m in &ms {
            potential(&cfg, b, m)?;
        }
    }
    let alpha = cfg.get("sim.alpha", Some(0.2))?;
    let sc = ScanConfig {
        n,
        kappa: cfg.get("potential.kappa", Some(100.0))?,
        alpha,
        l: cfg.get("sim.l", Some(1.0))?,
        betas,
        ms,
        schedule: schedule(&cfg)?,
        chains: cfg.get("sim.chains", Some(1))?,
        seed: cfg.get("run.seed", None)?,
        params: chain_params(&cfg, alpha)?,
    };
    let out = cfg.out_dir();
    create_dir(&out)?;
    let table = symmetry_breaking_scan(&sc)?;

    let mut csv = preamble(&cfg.effective(), &[]);
    let stats = ["bond_dev_sq", "jac_dev_sq", "defect_density"];
    let mut header = vec!["beta".to_string(), "m".to_string()];
    for s in stats {
        header.extend([s.to_string(), format!("{s}_err"), format!("{s}_tau")]);
    }
    header.extend(["acc_displace", "acc_create", "acc_annihilate", "delta"].map(String::from));
    csv.push_str(&header.join(","));
    csv.push('\n');
    for r in &table.rows {
        let mut row = vec![num(r.beta), num(r.m)];
        for s in [&r.bond_dev_sq, &r.jac_dev_sq, &r.defect_density] {
            row.extend([num(s.mean), num(s.stderr), num(s.tau_int)]);
        }
        row.extend(r.acceptance.iter().map(|&a| num(a)));
        row.push(num(r.delta));
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    std::fs::write(out.join("scan.csv"), csv)?;

    #[derive(Serialize)]
    struct Trend {
        m: f64,
        bond_slope: f64,
        bond_strictly_decreasing: bool,
        jac_strictly_decreasing: bool,
    }
    let trends: Vec<Trend> = sc
        .ms
        .iter()
        .map(|&m| {
            let rows = table.at_m(m);
            let dec = |f: &dyn Fn(&trilattice::observables::ScanRow) -> f64| {
                trilattice::observables::strictly_decreasing(&rows.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            Trend {
                m,
                bond_slope: table.bond_slope(m),
                bond_strictly_decreasing: dec(&|r| r.bond_dev_sq.mean),
                jac_strictly_decreasing: dec(&|r| r.jac_dev_sq.mean),
            }
        })
        .collect();
    #[derive(Serialize)]
    struct ScanSummary<'a> {
        schema: &'static str,
        version: &'static str,
        seed: u64,
        parameters: BTreeMap<String, String>,
        rows: &'a [trilattice::observables::ScanRow],
        trends: Vec<Trend>,
        wall_clock: WallClock,
    }
    write_json(
        &out.join("scan_summary.json"),
        &ScanSummary {
            schema: "trilattice-scan/1",
            version: env!("CARGO_PKG_VERSION"),
            seed: sc.seed,
            parameters: cfg.effective(),
            rows: &table.rows,
            trends,
            wall_clock: clock.read(),
        },
    )
}
