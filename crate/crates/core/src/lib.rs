//! Monte Carlo sampling and rigidity diagnostics for a two-dimensional triangular-lattice
//! crystal with isolated vacancies under periodic boundary conditions.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases at
//! the crate root fix the usual double-precision instantiation.

pub mod configuration;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod lattice;
pub mod observables;
pub mod potential;
pub mod sampler;
pub mod scalar;

pub use configuration::{Configuration, EdgeClass, Rejection, SiteMove, Snapshot};
pub use energy::{hamiltonian, DeltaH, EnergyBreakdown};
pub use error::{Error, Result};
pub use geometry::{Mat2, TrianglePlacement, Vec2};
pub use lattice::{EdgeId, LatticeTorus, Orientation, SiteIndex, TriangleId};
pub use observables::{ObservableRecord, Summary};
pub use potential::{PotentialKind, PotentialSpec};
pub use sampler::{Chain, ChainParams, Checkpoint, RunSchedule};
pub use scalar::Scalar;

pub type Vec2f64 = Vec2<f64>;
pub type Mat2f64 = Mat2<f64>;
pub type PotentialSpec64 = PotentialSpec<f64>;
pub type Configuration64 = Configuration<f64>;
pub type Configuration32 = Configuration<f32>;
pub type Chain64 = Chain<f64>;
