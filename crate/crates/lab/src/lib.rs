//! File formats, experiment runner, sweeps and verification suites built on
//! `gnnlab-core`. The `gnnlab` binary is a thin CLI over this crate.

pub mod experiment;
pub mod formats;
pub mod plot;
pub mod sweep;
pub mod verify;

pub use experiment::{resolve_spec, run, ExperimentSpec, RunError, RunResult};
