//! Deterministic seed derivation.
//!
//! Replication seeds are mixed from the base seed and stable labels so that
//! results do not depend on scheduling order or parallelism width. The std
//! hasher is process-seeded and therefore unusable here; we mix explicitly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step: the standard 64-bit finalizer-based generator.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// FNV-1a over a label, for folding strings into the seed chain.
pub fn label_hash(label: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Mixes a base seed with any number of stable 64-bit words.
pub fn mix(base: u64, words: &[u64]) -> u64 {
    let mut state = base ^ 0x6a09e667f3bcc908;
    let mut out = splitmix64(&mut state);
    for &w in words {
        state ^= w;
        out = splitmix64(&mut state);
    }
    out
}

/// A ChaCha8 generator for the given derived seed.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
