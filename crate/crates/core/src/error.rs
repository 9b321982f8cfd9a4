use alloc::string::String;
use thiserror::Error;

use crate::model::SolveStatus;

/// Errors raised by the planning model, the formulations and the solver loop.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid capacity level {level}: facility has {count} levels")]
    InvalidLevel { level: usize, count: usize },

    #[error("invalid facility index {0}")]
    InvalidFacility(usize),

    #[error("pair ({from}, {to}) is not a feasible module move")]
    InfeasibleMove { from: usize, to: usize },

    #[error("scenario tree horizon {tree} does not match instance horizon {instance}")]
    HorizonMismatch { tree: usize, instance: usize },

    #[error("capacity plan is inconsistent: {0}")]
    InconsistentPlan(String),

    #[error("solver reported {status:?} while solving {context}")]
    Solver {
        status: SolveStatus,
        context: &'static str,
    },

    #[error("solver backend failure: {0}")]
    Backend(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = core::result::Result<T, Error>;
