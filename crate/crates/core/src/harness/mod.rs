//! Configuration, run orchestration, CSV output, sweeps and self-checks.

pub mod config;
pub mod metrics;
pub mod run;
pub mod sweep;
pub mod validate;
