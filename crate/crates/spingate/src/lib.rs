//! Experiment runner around `spingate-core`: TOML configuration, the
//! GA→gradient recipe, γ sweeps, entropy traces, robustness ensembles and
//! the invariant check, with CSV/JSON artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;

pub use config::{Resolved, RunConfig};
pub use error::{CliError, Result};
pub use parallel::Rayon;
