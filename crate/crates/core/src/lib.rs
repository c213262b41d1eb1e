//! Seedable multi-agent delivery simulator. Agents learn by rule, imitation,
//! Q-learning or a fixed script, and may consult an individual, shared or
//! filtered collective memory whose actions override the learned policy only
//! when their credibility clears a threshold.

pub mod decision;
pub mod harness;
pub mod memory;
pub mod model;
pub mod policy;
pub mod rng;
pub mod world;

pub use harness::config::{load_config, parse_config, ExperimentConfig};
pub use harness::run::{run_experiment, simulate, HarnessError};
pub use world::World;
