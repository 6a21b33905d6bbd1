//! Fixed-length bitset used for voxel occupancy and per-patch visibility
//! vectors.
//!
//! Bit `k` lives in word `k / 64`, bit `k % 64`. The hex encoding packs bits
//! LSB-first into bytes (bit `k` -> byte `k / 8`, bit `k % 8`) and renders the
//! bytes as lowercase hex in order, so vectors round-trip losslessly through
//! the JSON artifacts.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitset {
    words: Vec<u64>,
    len: usize,
}

impl Bitset {
    pub fn new(len: usize) -> Self {
        Bitset {
            words: vec![0u64; len.div_ceil(64)],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        debug_assert!(idx < self.len);
        self.words[idx / 64] & (1u64 << (idx % 64)) != 0
    }

    #[inline]
    pub fn set(&mut self, idx: usize, value: bool) {
        debug_assert!(idx < self.len);
        let mask = 1u64 << (idx % 64);
        if value {
            self.words[idx / 64] |= mask;
        } else {
            self.words[idx / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn any(&self) -> bool {
        self.words.iter().any(|&w| w != 0)
    }

    /// `self |= other`. Lengths must match.
    pub fn union_with(&mut self, other: &Bitset) {
        assert_eq!(self.len, other.len, "bitset length mismatch");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    /// Number of bits set in `self` but not in `other` (marginal gain).
    pub fn count_new(&self, other: &Bitset) -> usize {
        assert_eq!(self.len, other.len, "bitset length mismatch");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & !b).count_ones() as usize)
            .sum()
    }

    pub fn is_subset_of(&self, other: &Bitset) -> bool {
        assert_eq!(self.len, other.len, "bitset length mismatch");
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.get(i))
    }

    /// Sum of `weights[k]` over bits set in `self` but not in `other`.
    pub fn weighted_new(&self, other: &Bitset, weights: &[f64]) -> f64 {
        assert_eq!(self.len, other.len, "bitset length mismatch");
        let mut total = 0.0;
        for i in 0..self.len {
            if self.get(i) && !other.get(i) {
                total += weights[i];
            }
        }
        total
    }

    pub fn to_hex(&self) -> String {
        let mut bytes = vec![0u8; self.len.div_ceil(8)];
        for i in 0..self.len {
            if self.get(i) {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        hex::encode(bytes)
    }

    pub fn from_hex(s: &str, len: usize) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::MalformedArtifact {
            what: "bitset".into(),
            reason: e.to_string(),
        })?;
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::MalformedArtifact {
                what: "bitset".into(),
                reason: format!("expected {} bytes for {} bits, got {}", len.div_ceil(8), len, bytes.len()),
            });
        }
        let mut out = Bitset::new(len);
        for i in 0..len {
            if bytes[i / 8] & (1 << (i % 8)) != 0 {
                out.set(i, true);
            }
        }
        Ok(out)
    }
}
