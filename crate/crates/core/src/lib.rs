//! Spectral problems for `-u'' + q u = lambda u` on an interval split into
//! three pieces by two transmission points, with a spectral-parameter
//! boundary condition at the right end, and regularized trace sums for them.

pub mod asymptotics;
pub mod error;
pub mod integrator;
pub mod poly;
pub mod potential;
pub mod problem;
pub mod reference;
pub mod shooting;
pub mod spectrum;
pub mod trace;

pub use error::{Error, Result};
pub use poly::Poly;
pub use potential::{CallablePotential, PotentialSpec};
pub use problem::{IntegratorKind, ProblemSpec, Side, SideConvention, SolverSettings, ValidatedProblem};
