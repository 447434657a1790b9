//! Seeded random-number streams.
//!
//! Every stochastic operation in this crate is deterministic given a
//! `u64` seed. Replicated computations (sample paths, queue replications,
//! optimizer restarts) draw from independent ChaCha substreams indexed by
//! replication number, so a parallel map over replications produces the
//! same results as a sequential loop regardless of thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Root stream for a seed.
pub fn root(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `index` of `seed`.
///
/// Substreams with distinct indices never overlap; the same (seed, index)
/// pair always yields the same stream.
pub fn substream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives an independent `u64` seed from a root seed, a replication
/// index, and a salt separating seed families within one run. SplitMix64
/// finalizer, so nearby inputs map to decorrelated outputs.
pub fn derive_seed(seed: u64, index: u64, salt: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(salt.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
