use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice size N = {n} too small: {what} requires N >= {min}")]
    LatticeTooSmall { n: usize, min: usize, what: &'static str },

    #[error("degenerate reference triangle (zero area)")]
    DegenerateTriangle,

    #[error("side lengths ({0}, {1}, {2}) violate the triangle inequality")]
    TriangleInequality(f64, f64, f64),

    #[error("all weights are zero")]
    ZeroWeights,

    #[error("bond length {r} outside potential domain [{lo}, {hi}]")]
    OutsideDomain { r: f64, lo: f64, hi: f64 },

    #[error("bond {edge} ({a}-{b}) has length {r}, outside the potential domain")]
    BondOutsideDomain { edge: usize, a: usize, b: usize, r: f64 },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("site {site} is not a hole")]
    NotAHole { site: usize },

    #[error("hole at site {site} has a missing neighbor at site {neighbor}")]
    AdjacentHoles { site: usize, neighbor: usize },

    #[error("configuration violates constraints: {0}")]
    Constraint(String),

    #[error("near-standard radius r = {r} must lie in (0, alpha/4 = {max})")]
    RadiusTooLarge { r: f64, max: f64 },

    #[error("cannot place {requested} isolated defects on the torus (max feasible {max_feasible})")]
    TooManyDefects { requested: usize, max_feasible: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("cache audit failed at step {step}: {detail}")]
    CacheAudit { step: u64, detail: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
