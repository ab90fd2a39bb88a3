//! Numerical laboratory for central limit theorems of one-cut beta-ensembles:
//! equilibrium measures, master-operator inversion, the exact master-equation
//! decomposition of linear statistics, Stein diagnostics and bounds, and
//! empirical distance and rate measurement.

pub mod clt;
pub mod equilibrium;
pub mod error;
pub mod experiment;
pub mod funcspace;
pub mod master;
pub mod metrics;
pub mod sampler;

pub use error::{Error, Result};
pub use funcspace::{cheb_fit, ChebSeries, FunctionSpec};
