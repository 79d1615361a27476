//! Seed substream derivation.
//!
//! Every stage that draws randomness does so from a generator derived as
//! (run seed ⊕ stage tag ⊕ index). Stage tags are fixed strings, so adding or
//! reordering stages never shifts another stage's draws, and per-index
//! substreams (per cluster, per source) are independent of iteration order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; decorrelates structured inputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives the substream seed for (seed, stage tag, index).
pub fn substream(seed: u64, tag: &str, index: u64) -> u64 {
    mix(seed ^ fnv1a(tag) ^ mix(index))
}

/// Seeded generator for one substream. ChaCha8 keeps the stream identical
/// across platforms and compiler versions, which the byte-determinism
/// contract depends on.
pub fn rng(seed: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream(seed, tag, index))
}

/// Uniform sample of `m` distinct indices from `0..len` without replacement,
/// via a partial Fisher–Yates pass; the result is sorted ascending so callers
/// preserve original record order.
pub fn sample_indices<R: Rng + ?Sized>(rng: &mut R, len: usize, m: usize) -> Vec<usize> {
    assert!(m <= len, "cannot sample {m} of {len}");
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..m {
        let j = rng.gen_range(i..len);
        idx.swap(i, j);
    }
    idx.truncate(m);
    idx.sort_unstable();
    idx
}
