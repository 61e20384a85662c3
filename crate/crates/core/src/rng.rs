//! Seed derivation for reproducible parallel streams.
//!
//! Every worker stream is a pure function of the master seed and a stream
//! index, so results do not depend on thread scheduling or worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; decorrelates nearby inputs.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent seed from a master seed, a salt naming the purpose
/// of the stream, and a stream index (replicate or chain number).
pub fn derive_seed(master: u64, salt: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(salt.wrapping_add(0x51a5_u64)) ^ splitmix64(index))
}

/// RNG for a derived stream.
pub fn stream_rng(master: u64, salt: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, salt, index))
}

/// Salt for dataset generation streams.
pub const SALT_DATA: u64 = 1;
/// Salt for MCMC chain streams.
pub const SALT_CHAIN: u64 = 2;
/// Salt for exact posterior sampling streams.
pub const SALT_EXACT: u64 = 3;
