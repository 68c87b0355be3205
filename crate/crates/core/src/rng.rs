//! Seed splitting.
//!
//! Every simulation has one master seed. Independent ChaCha streams are carved
//! out of it by stream id: stream 0 drives demand, stream `1 + i` drives agent
//! `i`. Adding a consumer never shifts another consumer's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const DEMAND_STREAM: u64 = 0;

pub fn stream(master_seed: u64, stream_id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

pub fn demand_stream(master_seed: u64) -> SimRng {
    stream(master_seed, DEMAND_STREAM)
}

pub fn agent_stream_id(agent: usize) -> u64 {
    1 + agent as u64
}

pub fn agent_stream(master_seed: u64, agent: usize) -> SimRng {
    stream(master_seed, agent_stream_id(agent))
}
