pub mod appgrad;
pub mod baselines;
pub mod config;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod matrix;
pub mod metrics;
pub mod problem;
pub mod random;
pub mod reference;
pub mod stochastic;
pub mod trace;

pub use config::{SolverConfig, SolverKind};
pub use error::{CcaError, Result};
