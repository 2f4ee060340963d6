//! Seeded random streams.
//!
//! A run owns one seed. Environment sampling, policy-side randomisation and
//! estimator partitions each draw from their own ChaCha stream, so adding an
//! estimator call never shifts the environment's click draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ENV_STREAM: u64 = 0;
const POLICY_STREAM: u64 = 1;

/// SplitMix64 finaliser, used to derive independent sub-seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, tag: u64) -> u64 {
    mix64(base ^ mix64(tag))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone)]
pub struct RunRng {
    pub env: ChaCha8Rng,
    pub policy: ChaCha8Rng,
    partition_seed: u64,
}

impl RunRng {
    pub fn new(seed: u64) -> Self {
        Self {
            env: stream(seed, ENV_STREAM),
            policy: stream(seed, POLICY_STREAM),
            partition_seed: derive_seed(seed, 0x7061_7274),
        }
    }

    /// Seed component for estimator partitions in this run.
    pub fn partition_seed(&self) -> u64 {
        self.partition_seed
    }
}

/// Generator for one estimator call, keyed by the run's partition seed and
/// a per-call key.
pub fn partition_rng(partition_seed: u64, key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(partition_seed, key))
}
