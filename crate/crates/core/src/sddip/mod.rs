//! Stochastic dual dynamic integer programming with strengthened
//! Magnanti–Wong cuts and an alternating cut strategy.

pub mod cut;
pub mod engine;
pub mod exec;
pub mod generation;
pub mod memory;

pub use cut::{Cut, CutFamily, CutPool, CutPreset};
pub use engine::{run, RunStatus, Sddip, SddipConfig, SddipResult};
pub use exec::{Clock, Executor, NoClock, Sequential};
