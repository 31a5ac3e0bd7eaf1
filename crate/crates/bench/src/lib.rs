//! Shared fixtures for the benchmark targets.

use modtraj_core::synth::{generate, SynthConfig, SynthOutput};

/// Deterministic synthetic corpus sized for benchmarking.
pub fn fixture(n_users: usize, seed: u64) -> SynthOutput {
    let cfg = SynthConfig { n_users, seed, ..SynthConfig::default() };
    generate(&cfg).expect("benchmark config is valid")
}
