//! Solver backend, parallel execution, file formats and command
//! implementations on top of `modcap-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod highs;
pub mod io;

pub use error::CliError;
pub use modcap_core as core_model;
