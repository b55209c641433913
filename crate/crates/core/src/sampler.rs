//! Metropolis-Hastings chain for the Gibbs measure, with single-site displacements and
//! vacancy creation/removal moves.
//!
//! The reference measure per site is Lebesgue measure plus a unit atom at the hole state.
//! A hole is refilled at `u = fill + xi`, `xi` uniform on a disk of radius `rho` around the
//! six-neighbor mean, with density `q = 1/(pi rho^2)`. Detailed balance between the two
//! states then gives the acceptance factors
//!
//! ```text
//! hole -> particle:  exp(-beta dH) * (p_create / p_annihilate) / q
//! particle -> hole:  exp(-beta dH) * (p_annihilate / p_create) * q   (if |u - fill| < rho)
//! ```
//!
//! The grid proposal replaces the disk by the `K` grid points within `rho` of the fill
//! point and `q` by `1/(K h^2)`; it exists for the exact-enumeration audit.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::configuration::{Configuration, PendingChange, SiteMove, Snapshot};
use crate::energy::{delta_h, hamiltonian, DeltaH};
use crate::error::{Error, Result};
use crate::geometry::{uniform_disk, Vec2};
use crate::lattice::LatticeTorus;
use crate::observables::{measure, ObservableRecord};
use crate::potential::PotentialSpec;
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: &str = "trilattice-checkpoint/1";
/// Accepted moves between full cache/energy audits.
pub const DEFAULT_AUDIT_EVERY: u64 = 10_000;
/// Burn-in sweeps between proposal-width adjustments.
pub const TUNE_INTERVAL: u64 = 10;
/// Target window for the displacement acceptance rate.
pub const TARGET_ACCEPTANCE: (f64, f64) = (0.3, 0.5);
const CACHE_TOL: f64 = 1e-9;
const ENERGY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveMix {
    pub displace: f64,
    pub create: f64,
    pub annihilate: f64,
}

impl Default for MoveMix {
    fn default() -> Self {
        Self { displace: 0.9, create: 0.05, annihilate: 0.05 }
    }
}

impl MoveMix {
    pub fn validate(&self) -> Result<()> {
        let all = [self.displace, self.create, self.annihilate];
        if all.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameter(format!("move probabilities must be >= 0: {all:?}")));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("move probabilities must sum to 1: {all:?}")));
        }
        if (self.create > 0.0) != (self.annihilate > 0.0) {
            return Err(Error::InvalidParameter(
                "create and annihilate moves must both be enabled or both disabled".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proposal {
    /// Displacement uniform on a disk of radius `delta`; refill disk of radius `rho`.
    Continuous { delta: f64, rho: f64 },
    /// Displacements restricted to `h * {-w..w}^2`; jumps uniform in `{-jump..jump}^2`.
    Grid { h: f64, half_width: i64, jump: i64, rho: f64 },
}

impl Proposal {
    /// Defaults for a given bond window half-width.
    pub fn continuous_for(alpha: f64) -> Self {
        Proposal::Continuous { delta: alpha / 4.0, rho: alpha / 4.0 }
    }

    pub fn rho(&self) -> f64 {
        match *self {
            Proposal::Continuous { rho, .. } | Proposal::Grid { rho, .. } => rho,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteSelection {
    All,
    Only(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub mix: MoveMix,
    pub proposal: Proposal,
    pub selection: SiteSelection,
    pub audit_every: u64,
    /// Adjust the displacement width during burn-in.
    pub tune: bool,
}

impl ChainParams {
    pub fn continuous(alpha: f64) -> Self {
        Self {
            mix: MoveMix::default(),
            proposal: Proposal::continuous_for(alpha),
            selection: SiteSelection::All,
            audit_every: DEFAULT_AUDIT_EVERY,
            tune: true,
        }
    }

    pub fn validate(&self, alpha: f64, num_sites: usize) -> Result<()> {
        self.mix.validate()?;
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        match self.proposal {
            Proposal::Continuous { delta, rho } => {
                if !(delta > 0.0 && delta.is_finite()) {
                    return bad("displacement width must be positive");
                }
                if !(rho > 0.0 && rho <= alpha / 4.0) {
                    return bad("refill radius must lie in (0, alpha/4]");
                }
            }
            Proposal::Grid { h, half_width, jump, rho } => {
                if !(h > 0.0) || half_width < 1 || jump < 1 || !(rho >= h) {
                    return bad("grid proposal needs h > 0, half_width >= 1, jump >= 1, rho >= h");
                }
            }
        }
        if let SiteSelection::Only(s) = self.selection {
            if s >= num_sites {
                return bad("selected site out of range");
            }
        }
        if self.audit_every == 0 {
            return bad("audit interval must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveTally {
    pub proposed: u64,
    pub accepted: u64,
    /// Proposals leaving the allowed configuration space (or not applicable to the site).
    pub hard_rejected: u64,
}

impl MoveTally {
    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tallies {
    pub displace: MoveTally,
    pub create: MoveTally,
    pub annihilate: MoveTally,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveKind {
    Displace,
    Create,
    Annihilate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub kind: MoveKind,
    pub site: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSchedule {
    pub burn_in: u64,
    pub sweeps: u64,
    pub thin: u64,
}

impl RunSchedule {
    pub fn total(&self) -> u64 {
        self.burn_in + self.sweeps
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 || self.sweeps == 0 {
            return Err(Error::InvalidParameter("sweeps and thin must be positive".into()));
        }
        Ok(())
    }
}

pub struct Chain<T: Scalar> {
    config: Configuration<T>,
    params: ChainParams,
    rng: ChaCha8Rng,
    step: u64,
    sweeps_done: u64,
    tallies: Tallies,
    accepted_since_audit: u64,
    /// Energy tracked by accumulating accepted `dH`, compared against a full evaluation at
    /// every audit.
    energy: T,
    tune_window: (u64, u64),
    scratch: PendingChange<T>,
}

impl<T: Scalar> Chain<T> {
    /// Chain from a valid starting configuration. `stream` separates chains that share a seed.
    pub fn new(config: Configuration<T>, params: ChainParams, seed: u64, stream: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self::with_rng(config, params, rng)
    }

    fn with_rng(config: Configuration<T>, params: ChainParams, rng: ChaCha8Rng) -> Result<Self> {
        params.validate(config.spec().alpha.as_f64(), config.lattice().num_sites())?;
        let report = config.check_constraints();
        if !report.all_ok() {
            return Err(Error::Constraint(format!(
                "initial configuration: {} bad bonds, {} close defect pairs, {} flipped triangles",
                report.bad_edges.len(),
                report.bad_pairs.len(),
                report.bad_triangles.len()
            )));
        }
        let energy = hamiltonian(&config)?.total;
        Ok(Self {
            config,
            params,
            rng,
            step: 0,
            sweeps_done: 0,
            tallies: Tallies::default(),
            accepted_since_audit: 0,
            energy,
            tune_window: (0, 0),
            scratch: PendingChange::new(),
        })
    }

    pub fn config(&self) -> &Configuration<T> {
        &self.config
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn tallies(&self) -> &Tallies {
        &self.tallies
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweeps_done
    }

    /// Current displacement proposal width (grid proposals report the grid step).
    pub fn delta(&self) -> f64 {
        match self.params.proposal {
            Proposal::Continuous { delta, .. } => delta,
            Proposal::Grid { h, .. } => h,
        }
    }

    pub fn tracked_energy(&self) -> T {
        self.energy
    }

    /// One Metropolis-Hastings update.
    pub fn step(&mut self) -> Result<StepOutcome> {
        self.step += 1;
        let mix = self.params.mix;
        let u: f64 = self.rng.gen();
        let kind = if u < mix.displace {
            MoveKind::Displace
        } else if u < mix.displace + mix.create {
            MoveKind::Create
        } else {
            MoveKind::Annihilate
        };
        let site = match self.params.selection {
            SiteSelection::All => self.rng.gen_range(0..self.config.lattice().num_sites()),
            SiteSelection::Only(s) => s,
        };
        let accepted = self.attempt(kind, site)?;
        let tally = match kind {
            MoveKind::Displace => &mut self.tallies.displace,
            MoveKind::Create => &mut self.tallies.create,
            MoveKind::Annihilate => &mut self.tallies.annihilate,
        };
        tally.proposed += 1;
        match accepted {
            Some(true) => tally.accepted += 1,
            None => tally.hard_rejected += 1,
            Some(false) => {}
        }
        if kind == MoveKind::Displace {
            self.tune_window.0 += 1;
            if accepted == Some(true) {
                self.tune_window.1 += 1;
            }
        }
        Ok(StepOutcome { kind, site, accepted: accepted == Some(true) })
    }

    /// `Some(accepted)` after a Metropolis test, `None` for a hard rejection.
    fn attempt(&mut self, kind: MoveKind, site: usize) -> Result<Option<bool>> {
        let Some((mv, factor)) = self.propose(kind, site) else { return Ok(None) };
        let Some((ratio, dh)) = self.metropolis_ratio(&mv, factor) else { return Ok(None) };
        let accept = ratio >= 1.0 || self.rng.gen::<f64>() < ratio;
        if accept {
            self.config.apply(&mv, &self.scratch);
            self.energy = self.energy + dh;
            self.accepted_since_audit += 1;
            if self.accepted_since_audit >= self.params.audit_every {
                self.audit()?;
            }
        }
        Ok(Some(accept))
    }

    /// `exp(-beta dH) * factor` for an admissible move, with its energy change. Leaves the
    /// admissibility scratch filled for `apply`.
    pub(crate) fn metropolis_ratio(&mut self, mv: &SiteMove<T>, factor: f64) -> Option<(f64, T)> {
        self.config.admissibility(mv, &mut self.scratch).ok()?;
        let DeltaH::Finite(dh) = delta_h(&self.config, mv) else { return None };
        let beta = self.config.spec().beta.as_f64();
        Some(((-beta * dh.as_f64()).exp() * factor, dh))
    }

    /// Proposed move and its proposal/reference-measure factor.
    fn propose(&mut self, kind: MoveKind, site: usize) -> Option<(SiteMove<T>, f64)> {
        let c = &self.config;
        let mix = self.params.mix;
        match kind {
            MoveKind::Displace => {
                if !c.is_present(site) {
                    return None;
                }
                let cur = c.displacement(site);
                let to = match self.params.proposal {
                    Proposal::Continuous { delta, .. } => cur + uniform_disk(&mut self.rng, T::lit(delta)),
                    Proposal::Grid { h, half_width, jump, .. } => {
                        let (i, j) = grid_index(cur, h);
                        let ni = i + self.rng.gen_range(-jump..=jump);
                        let nj = j + self.rng.gen_range(-jump..=jump);
                        if ni.abs() > half_width || nj.abs() > half_width {
                            return None;
                        }
                        grid_point(ni, nj, h)
                    }
                };
                Some((SiteMove::Displace { site, to }, 1.0))
            }
            MoveKind::Create => {
                if !c.is_present(site) {
                    return None;
                }
                let mut fill = Vec2::zero();
                for &t in c.lattice().neighbors(site) {
                    if !c.is_present(t) {
                        return None;
                    }
                    fill += c.displacement(t);
                }
                let fill = fill * T::lit(1.0 / 6.0);
                let cur = c.displacement(site);
                let rho = self.params.proposal.rho();
                if !((cur - fill).norm().as_f64() < rho) {
                    return None;
                }
                let q = match self.params.proposal {
                    Proposal::Continuous { .. } => 1.0 / (std::f64::consts::PI * rho * rho),
                    Proposal::Grid { h, half_width, .. } => {
                        1.0 / (refill_points(fill, h, half_width, rho).len() as f64 * h * h)
                    }
                };
                Some((SiteMove::CreateDefect { site }, q * mix.annihilate / mix.create))
            }
            MoveKind::Annihilate => {
                if c.is_present(site) {
                    return None;
                }
                let fill = c.hat_displacement(site);
                let (to, q) = match self.params.proposal {
                    Proposal::Continuous { rho, .. } => (
                        fill + uniform_disk(&mut self.rng, T::lit(rho)),
                        1.0 / (std::f64::consts::PI * rho * rho),
                    ),
                    Proposal::Grid { h, half_width, rho, .. } => {
                        let pts = refill_points(fill, h, half_width, rho);
                        if pts.is_empty() {
                            return None;
                        }
                        let (i, j) = pts[self.rng.gen_range(0..pts.len())];
                        (grid_point(i, j, h), 1.0 / (pts.len() as f64 * h * h))
                    }
                };
                Some((SiteMove::AnnihilateDefect { site, to }, mix.create / mix.annihilate / q))
            }
        }
    }

    /// Compare caches and tracked energy against a full recomputation.
    pub fn audit(&mut self) -> Result<()> {
        let eps = T::epsilon().as_f64();
        let cache_tol = CACHE_TOL.max(1e4 * eps);
        let energy_tol = ENERGY_TOL.max(1e4 * eps);
        let dev = self.config.cache_deviation()?.as_f64();
        if !(dev <= cache_tol) {
            return Err(Error::CacheAudit {
                step: self.step,
                detail: format!("cache deviation {dev:e} exceeds {cache_tol:e}"),
            });
        }
        let fresh = hamiltonian(&self.config)?.total;
        let drift = (fresh - self.energy).abs().as_f64();
        if !(drift <= energy_tol * (1.0 + fresh.abs().as_f64())) {
            return Err(Error::CacheAudit {
                step: self.step,
                detail: format!("energy drift {drift:e} exceeds tolerance"),
            });
        }
        self.energy = fresh;
        self.accepted_since_audit = 0;
        Ok(())
    }

    /// `N^2` steps.
    pub fn sweep(&mut self) -> Result<()> {
        for _ in 0..self.config.lattice().num_sites() {
            self.step()?;
        }
        Ok(())
    }

    fn tune(&mut self) {
        let (proposed, accepted) = std::mem::take(&mut self.tune_window);
        let Proposal::Continuous { delta, rho } = self.params.proposal else { return };
        if proposed == 0 {
            return;
        }
        let rate = accepted as f64 / proposed as f64;
        let alpha = self.config.spec().alpha.as_f64();
        let delta = if rate < TARGET_ACCEPTANCE.0 {
            delta * 0.8
        } else if rate > TARGET_ACCEPTANCE.1 {
            (delta * 1.25).min(2.0 * alpha)
        } else {
            delta
        };
        self.params.proposal = Proposal::Continuous { delta, rho };
    }

    /// Advance the schedule until `until` total sweeps (burn-in included) or its end,
    /// handing each thinned post-burn-in record to `emit`. The width is tuned during
    /// burn-in only.
    pub fn run_until(
        &mut self,
        schedule: &RunSchedule,
        until: u64,
        mut emit: impl FnMut(ObservableRecord) -> Result<()>,
    ) -> Result<()> {
        schedule.validate()?;
        let stop = until.min(schedule.total());
        while self.sweeps_done < stop {
            self.sweep()?;
            self.sweeps_done += 1;
            if self.sweeps_done <= schedule.burn_in {
                if self.params.tune && self.sweeps_done % TUNE_INTERVAL == 0 {
                    self.tune();
                }
                if self.sweeps_done == schedule.burn_in {
                    self.tune_window = (0, 0);
                }
            } else {
                let k = self.sweeps_done - schedule.burn_in;
                if k % schedule.thin == 0 {
                    emit(measure(&self.config, k)?)?;
                }
            }
        }
        Ok(())
    }

    /// Run the whole schedule and collect its records.
    pub fn run(&mut self, schedule: &RunSchedule) -> Result<Vec<ObservableRecord>> {
        let mut out = Vec::new();
        self.run_until(schedule, u64::MAX, |r| {
            out.push(r);
            Ok(())
        })?;
        Ok(out)
    }

    /// `burn_in` sweeps, then `count` configurations spaced `thin` sweeps apart. The width
    /// is tuned during the burn-in if enabled.
    pub fn collect_configs(&mut self, burn_in: u64, count: usize, thin: u64) -> Result<Vec<Configuration<T>>> {
        for k in 1..=burn_in {
            self.sweep()?;
            if self.params.tune && k % TUNE_INTERVAL == 0 {
                self.tune();
            }
        }
        self.tune_window = (0, 0);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            for _ in 0..thin.max(1) {
                self.sweep()?;
            }
            out.push(self.config.clone());
        }
        Ok(out)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION.to_string(),
            snapshot: self.config.to_snapshot(),
            params: self.params,
            rng: RngState::capture(&self.rng),
            step: self.step,
            sweeps_done: self.sweeps_done,
            accepted_since_audit: self.accepted_since_audit,
            tallies: self.tallies,
            tune_window: self.tune_window,
        }
    }

    pub fn from_checkpoint(cp: &Checkpoint) -> Result<Self> {
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Snapshot(format!("unsupported checkpoint version {:?}", cp.version)));
        }
        let config = Configuration::from_snapshot(&cp.snapshot)?;
        let mut chain = Self::with_rng(config, cp.params, cp.rng.restore()?)?;
        chain.step = cp.step;
        chain.sweeps_done = cp.sweeps_done;
        chain.accepted_since_audit = cp.accepted_since_audit;
        chain.tallies = cp.tallies;
        chain.tune_window = cp.tune_window;
        Ok(chain)
    }
}

fn grid_index<T: Scalar>(u: Vec2<T>, h: f64) -> (i64, i64) {
    ((u.x.as_f64() / h).round() as i64, (u.y.as_f64() / h).round() as i64)
}

fn grid_point<T: Scalar>(i: i64, j: i64, h: f64) -> Vec2<T> {
    Vec2::new(T::lit(i as f64 * h), T::lit(j as f64 * h))
}

/// Grid points within `rho` of `fill`, in a fixed order.
fn refill_points<T: Scalar>(fill: Vec2<T>, h: f64, w: i64, rho: f64) -> Vec<(i64, i64)> {
    let (fx, fy) = (fill.x.as_f64(), fill.y.as_f64());
    let mut pts = Vec::new();
    for i in -w..=w {
        for j in -w..=w {
            let (dx, dy) = (i as f64 * h - fx, j as f64 * h - fy);
            if (dx * dx + dy * dy).sqrt() < rho {
                pts.push((i, j));
            }
        }
    }
    pts
}

/// Generator position, sufficient to continue the exact random stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    /// 32-byte seed, hex encoded.
    pub seed: String,
    pub stream: u64,
    /// Decimal, since JSON numbers cannot hold a `u128` portably.
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed().iter().map(|b| format!("{b:02x}")).collect(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let bad = || Error::Snapshot("malformed generator state".into());
        if self.seed.len() != 64 {
            return Err(bad());
        }
        let mut seed = [0u8; 32];
        for (i, b) in seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&self.seed[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos.parse().map_err(|_| bad())?);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub snapshot: Snapshot,
    pub params: ChainParams,
    pub rng: RngState,
    pub step: u64,
    pub sweeps_done: u64,
    pub accepted_since_audit: u64,
    pub tallies: Tallies,
    pub tune_window: (u64, u64),
}

impl Checkpoint {
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Output of one chain run to completion.
#[derive(Debug, Clone)]
pub struct ChainResult {
    pub records: Vec<ObservableRecord>,
    pub tallies: Tallies,
    pub delta: f64,
    pub checkpoint: Checkpoint,
}

/// Run `count` chains on separate threads. `make(i)` builds chain `i`; results come back
/// in chain order.
pub fn run_parallel<T, F>(count: usize, make: F, schedule: &RunSchedule) -> Result<Vec<ChainResult>>
where
    T: Scalar,
    F: Fn(usize) -> Result<Chain<T>> + Sync,
{
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..count)
            .map(|i| {
                let make = &make;
                scope.spawn(move || -> Result<ChainResult> {
                    let mut chain = make(i)?;
                    let records = chain.run(schedule)?;
                    Ok(ChainResult {
                        records,
                        tallies: chain.tallies,
                        delta: chain.delta(),
                        checkpoint: chain.checkpoint(),
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    })
}

/// Setup of the exact-enumeration audit: one mobile site on a grid, every other site
/// frozen at its standard position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceAuditConfig {
    pub n: usize,
    pub alpha: f64,
    pub l: f64,
    pub kappa: f64,
    pub beta: f64,
    pub m: f64,
    pub half_width: i64,
    pub jump: i64,
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
}

impl Default for BalanceAuditConfig {
    fn default() -> Self {
        Self {
            n: 5,
            alpha: 0.2,
            l: 1.0,
            kappa: 1.0,
            beta: 1.0,
            m: 3.0,
            half_width: 10,
            jump: 20,
            steps: 10_000_000,
            burn_in: 10_000,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceAuditReport {
    pub config: BalanceAuditConfig,
    /// Grid states plus the hole state.
    pub states: usize,
    /// States with nonzero exact weight.
    pub admissible_states: usize,
    /// Total-variation distance between empirical occupancy and the exact law.
    pub tv: f64,
    pub hole_exact: f64,
    pub hole_empirical: f64,
    /// Largest `|C(a,b) - C(b,a)| / sqrt(C(a,b) + C(b,a))` over observed transitions.
    pub max_flow_z: f64,
    pub acceptance: Tallies,
}

/// Exact law of the single-site conditional on `h * {-w..w}^2` plus the hole state
/// (last index). Grid states carry reference weight `h^2`, the hole weight 1.
pub fn enumerate_conditional(cfg: &BalanceAuditConfig) -> Result<Vec<f64>> {
    let (lattice, spec) = audit_model(cfg)?;
    let base = Configuration::standard(lattice.clone(), spec.clone());
    let h0 = hamiltonian(&base)?.total;
    let h = grid_step(cfg);
    let side = 2 * cfg.half_width + 1;
    let mut w = Vec::with_capacity((side * side + 1) as usize);
    let n = lattice.num_sites();
    for i in -cfg.half_width..=cfg.half_width {
        for j in -cfg.half_width..=cfg.half_width {
            let mut disp = vec![Vec2::zero(); n];
            disp[0] = Vec2::new(i as f64 * h, j as f64 * h);
            let c = Configuration::from_parts(lattice.clone(), spec.clone(), disp, vec![true; n])?;
            w.push(if c.check_constraints().all_ok() {
                h * h * (-cfg.beta * (hamiltonian(&c)?.total - h0)).exp()
            } else {
                0.0
            });
        }
    }
    let mut present = vec![true; n];
    present[0] = false;
    let c = Configuration::from_parts(lattice, spec, vec![Vec2::zero(); n], present)?;
    w.push((-cfg.beta * (hamiltonian(&c)?.total - h0)).exp());
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

fn grid_step(cfg: &BalanceAuditConfig) -> f64 {
    cfg.alpha / cfg.half_width as f64
}

fn audit_model(cfg: &BalanceAuditConfig) -> Result<(Arc<LatticeTorus>, Arc<PotentialSpec<f64>>)> {
    let lattice = Arc::new(LatticeTorus::new(cfg.n)?);
    let spec = Arc::new(PotentialSpec::quadratic(cfg.kappa, cfg.alpha, cfg.l, cfg.m, cfg.beta));
    Ok((lattice, spec))
}

/// Run the grid chain on the single-site conditional and compare with exact enumeration.
pub fn detailed_balance_audit(cfg: &BalanceAuditConfig) -> Result<BalanceAuditReport> {
    let exact = enumerate_conditional(cfg)?;
    let (lattice, spec) = audit_model(cfg)?;
    let h = grid_step(cfg);
    let params = ChainParams {
        mix: MoveMix::default(),
        proposal: Proposal::Grid { h, half_width: cfg.half_width, jump: cfg.jump, rho: cfg.alpha / 4.0 },
        selection: SiteSelection::Only(0),
        audit_every: DEFAULT_AUDIT_EVERY,
        tune: false,
    };
    let mut chain = Chain::new(Configuration::standard(lattice, spec), params, cfg.seed, 0)?;
    let side = 2 * cfg.half_width + 1;
    let states = (side * side + 1) as usize;
    let state_of = |c: &Configuration<f64>| -> usize {
        if !c.is_present(0) {
            return states - 1;
        }
        let (i, j) = grid_index(c.displacement(0), h);
        ((i + cfg.half_width) * side + (j + cfg.half_width)) as usize
    };
    for _ in 0..cfg.burn_in {
        chain.step()?;
    }
    let mut counts = vec![0u64; states];
    let mut flows = vec![0u32; states * states];
    let mut prev = state_of(chain.config());
    for _ in 0..cfg.steps {
        chain.step()?;
        let s = state_of(chain.config());
        counts[s] += 1;
        if s != prev {
            flows[prev * states + s] += 1;
        }
        prev = s;
    }
    let total = cfg.steps as f64;
    let tv = 0.5 * counts.iter().zip(&exact).map(|(&c, &p)| (c as f64 / total - p).abs()).sum::<f64>();
    let mut max_flow_z = 0.0f64;
    for a in 0..states {
        for b in a + 1..states {
            let (x, y) = (flows[a * states + b] as f64, flows[b * states + a] as f64);
            if x + y > 0.0 {
                max_flow_z = max_flow_z.max((x - y).abs() / (x + y).sqrt());
            }
        }
    }
    Ok(BalanceAuditReport {
        config: *cfg,
        states,
        admissible_states: exact.iter().filter(|&&p| p > 0.0).count(),
        tv,
        hole_exact: exact[states - 1],
        hole_empirical: counts[states - 1] as f64 / total,
        max_flow_z,
        acceptance: chain.tallies,
    })
}
