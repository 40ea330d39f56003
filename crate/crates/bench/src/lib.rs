//! Fixtures shared by the allocation benchmarks.

use hetnet::{generate_channel_tensor, generate_topology, ChannelTensor, NetworkTopology, SimConfig};

/// A drop built from `config` and `seed`.
pub fn drop_fixture(config: &SimConfig, seed: u64) -> (NetworkTopology, ChannelTensor) {
    let topology = generate_topology(config, seed).expect("valid config");
    let h = generate_channel_tensor(&topology, &config.channel, seed);
    (topology, h)
}

/// Table-sized defaults with `users` users.
pub fn config_with_users(users: usize) -> SimConfig {
    SimConfig {
        num_users: users,
        ..SimConfig::default()
    }
}
