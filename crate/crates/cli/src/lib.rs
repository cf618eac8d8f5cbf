//! Scenario runner behind the `qbm` binary: configuration parsing and the
//! `decay`, `wigner`, `regimes` and `sweep` commands.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{Curve, RawConfig, RunConfig};
pub use error::{CliError, Result};
