//! Deterministic seeding helpers.
//!
//! Every randomized operation in the crate takes an explicit 64-bit seed and
//! derives its generator here, so identical seeds and inputs reproduce
//! bit-identical output regardless of thread scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A seeded generator on an independent stream.
///
/// Streams with the same `seed` but different `stream` indices are
/// statistically independent, which is how chains, restarts and benchmark
/// cells obtain their private randomness.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from a parent seed and a tag (splitmix64 round).
///
/// Used for hierarchical seeding: benchmark cell seeds, per-(dag, draw)
/// effect seeds, and similar nested structures.
pub fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(tag.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
