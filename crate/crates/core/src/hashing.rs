//! Deterministic 64-bit mixing behind puzzles, admission checks, and flow ids.
//!
//! Every hash-like decision in the mechanisms goes through one fixed avalanche
//! mixer so that runs are reproducible across platforms and worker counts.
//! Cryptographic strength is not required at desk scale; uniformity and
//! determinism are.

use crate::system::Path;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer (Stafford mix13). Full-avalanche 64-bit mixer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one mixed value.
pub fn hash_words(words: &[u64]) -> u64 {
    let mut h = GOLDEN;
    for &w in words {
        h = mix64(h.wrapping_add(GOLDEN) ^ w);
    }
    h
}

/// Maps a mixed value to the unit interval with 53-bit resolution.
#[inline]
pub fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn path_tag(path: Path) -> u64 {
    match path {
        Path::Alpha => 0xA1,
        Path::Beta => 0xB2,
    }
}

/// Puzzle hash `h(pi, t_i, e, s)` in `[0, 1)`.
pub fn puzzle_hash(path: Path, trial_start: f64, endhost: u64, nonce: u64) -> f64 {
    unit_interval(hash_words(&[
        path_tag(path),
        trial_start.to_bits(),
        endhost,
        nonce,
    ]))
}

/// Admission hash `h(t_i | f)` in `[0, 1)`, locally computable by end-hosts.
pub fn admission_hash(interval_start: f64, flow_id: u64) -> f64 {
    unit_interval(hash_words(&[interval_start.to_bits(), flow_id]))
}

/// Derives a 64-bit flow identifier from immutable endpoint attributes
/// (source/destination surrogates; ports deliberately excluded).
pub fn flow_id(src: u64, dst: u64) -> u64 {
    hash_words(&[src, dst])
}
