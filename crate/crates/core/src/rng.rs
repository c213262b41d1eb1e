//! Deterministic random substreams.
//!
//! Every consumer of randomness draws from its own ChaCha stream keyed by
//! `(master seed, stream id)`, so results never depend on the order in which
//! agents are evaluated or on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededStream = ChaCha8Rng;

/// Stream used for order generation, congestion and weather.
pub const WORLD_STREAM: u64 = 0;
/// Stream used for initial placement of agents.
pub const SETUP_STREAM: u64 = 1;
const AGENT_STREAM_BASE: u64 = 1 << 32;

pub fn stream(master_seed: u64, stream_id: u64) -> SeededStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

/// Independent stream for one agent.
pub fn agent_stream(master_seed: u64, agent_id: u32) -> SeededStream {
    stream(master_seed, AGENT_STREAM_BASE + agent_id as u64)
}
