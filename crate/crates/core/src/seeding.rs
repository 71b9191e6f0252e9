//! Deterministic derivation of independent random streams from one run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named streams; each consumer of randomness draws from its own stream so
/// that enabling one component never perturbs the draws of another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Sampling = 1,
    Model = 2,
    Glosh = 3,
    Benchmark = 4,
    Cost = 5,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(seed), |acc, &p| splitmix(acc ^ splitmix(p)))
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream as u64]))
}

pub fn keyed_rng(seed: u64, stream: Stream, key: &[u64]) -> ChaCha8Rng {
    let mut parts = vec![stream as u64];
    parts.extend_from_slice(key);
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &parts))
}
