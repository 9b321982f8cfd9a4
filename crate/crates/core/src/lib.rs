//! Modular and mobile capacity planning under uncertainty.
//!
//! The crate holds the planning model, scenario trees, solver-independent
//! model builders, the SDDiP decomposition and the evaluation metrics. It is
//! `no_std` with `alloc`; LP/MIP solving is delegated to a [`SolverBackend`]
//! supplied by the caller.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod formulation;
pub mod generate;
pub mod instance;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scenario;
pub mod sddip;
pub mod stats;

pub use error::{Error, Result};
pub use instance::Instance;
pub use model::{ModelSpec, SolveResult, SolveStatus, SolverBackend};
pub use scenario::ScenarioTree;
