//! Bloom filter for router-side flow registries.
//!
//! Border routers track registrations and previously-active flows in Bloom
//! filters: constant-time insert and lookup, no false negatives, and a
//! false-positive rate of about `(1 - e^{-kn/m})^k` after `n` insertions.

use crate::hashing::mix64;

#[derive(Debug, Clone)]
pub struct BloomFilter {
    bits: Vec<u64>,
    /// Number of addressable bits.
    m: u64,
    /// Hash functions per key.
    k: u32,
    inserted: u64,
}

impl BloomFilter {
    /// Creates a filter with `m` bits and `k` hash functions.
    pub fn new(m: u64, k: u32) -> Self {
        assert!(m >= 64, "filter needs at least 64 bits");
        assert!(k >= 1, "filter needs at least one hash function");
        let words = m.div_ceil(64) as usize;
        BloomFilter {
            bits: vec![0; words],
            m,
            k,
            inserted: 0,
        }
    }

    /// Filter sized for `n` expected insertions at false-positive rate `fp`.
    pub fn with_capacity(n: u64, fp: f64) -> Self {
        assert!(n > 0 && fp > 0.0 && fp < 1.0);
        let ln2 = std::f64::consts::LN_2;
        let m = (-(n as f64) * fp.ln() / (ln2 * ln2)).ceil().max(64.0) as u64;
        let k = ((m as f64 / n as f64) * ln2).round().max(1.0) as u32;
        Self::new(m, k)
    }

    // Double hashing: index_i = h1 + i * h2 (mod m), h2 odd.
    fn indexes(&self, key: u64) -> impl Iterator<Item = u64> + '_ {
        let h1 = mix64(key ^ 0x517c_c1b7_2722_0a95);
        let h2 = mix64(key ^ 0x2545_f491_4f6c_dd1d) | 1;
        (0..self.k as u64).map(move |i| h1.wrapping_add(i.wrapping_mul(h2)) % self.m)
    }

    pub fn insert(&mut self, key: u64) {
        let idx: Vec<u64> = self.indexes(key).collect();
        for i in idx {
            self.bits[(i / 64) as usize] |= 1 << (i % 64);
        }
        self.inserted += 1;
    }

    /// True if the key may have been inserted; never false for inserted keys.
    pub fn contains(&self, key: u64) -> bool {
        self.indexes(key)
            .all(|i| self.bits[(i / 64) as usize] & (1 << (i % 64)) != 0)
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Analytic false-positive estimate for the current fill.
    pub fn analytic_fp_rate(&self) -> f64 {
        let exponent = -(self.k as f64) * self.inserted as f64 / self.m as f64;
        (1.0 - exponent.exp()).powi(self.k as i32)
    }

    pub fn clear(&mut self) {
        self.bits.fill(0);
        self.inserted = 0;
    }
}
