//! Fourier pseudo-spectral solvers for conserved gradient flows (phase field
//! crystal and functionalized Cahn-Hilliard) with adaptive second-order time
//! stepping.

pub mod benchmarks;
pub mod controller;
pub mod double_well;
pub mod error;
pub mod field;
pub mod integrators;
pub mod models;
pub mod objective;
pub mod preconditioner;
pub mod snapshot;
pub mod solvers;
pub mod spectral;
pub mod timing;

pub use error::{Error, Result};
pub use field::{Grid2D, PeriodicField, SpectralField};
pub use integrators::SchemeKind;
pub use models::{FchParams, Model, PfcParams};
pub use solvers::{SolverConfig, SolverKind};
pub use spectral::SpectralOps;
