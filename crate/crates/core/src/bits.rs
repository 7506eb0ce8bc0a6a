//! Plain bitvector with a rank/select directory.
//!
//! The directory keeps one cumulative 64-bit rank sample per 1024-bit
//! superblock (the first sample, always zero, is implicit) and one 32-bit
//! superblock hint per 8192 ones and per 8192 zeros to narrow the select
//! search. The directory is never serialized; it is rebuilt on load.

use crate::bitbuf::{serialized_bitbuf_bits, BitBuf, ByteReader, ByteWriter};
use crate::error::{Error, Result};

const SUPER_BITS: usize = 1024;
const SUPER_WORDS: usize = SUPER_BITS / 64;
const SELECT_SAMPLE: usize = 8192;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsBitvector {
    bits: BitBuf,
    ones: usize,
    /// `super_ranks[i]` = ones before superblock `i + 1`.
    super_ranks: Vec<u64>,
    /// `hints1[i]` = superblock holding the `(i + 1) * SELECT_SAMPLE`-th one.
    hints1: Vec<u32>,
    hints0: Vec<u32>,
}

impl RsBitvector {
    pub fn new(bits: BitBuf) -> Self {
        let nsuper = bits.len().div_ceil(SUPER_BITS);
        let mut super_ranks = Vec::with_capacity(nsuper.saturating_sub(1));
        let mut hints1 = Vec::new();
        let mut hints0 = Vec::new();
        let mut ones = 0usize;
        for (sb, chunk) in bits.words().chunks(SUPER_WORDS).enumerate() {
            if sb > 0 {
                super_ranks.push(ones as u64);
            }
            let before_ones = ones;
            let before_zeros = sb * SUPER_BITS - before_ones;
            ones += chunk.iter().map(|w| w.count_ones() as usize).sum::<usize>();
            let sb_len = (bits.len() - sb * SUPER_BITS).min(SUPER_BITS);
            let zeros = before_zeros + sb_len - (ones - before_ones);
            // record every sample boundary crossed inside this superblock
            while (hints1.len() + 1) * SELECT_SAMPLE <= ones {
                hints1.push(sb as u32);
            }
            while (hints0.len() + 1) * SELECT_SAMPLE <= zeros {
                hints0.push(sb as u32);
            }
        }
        Self {
            bits,
            ones,
            super_ranks,
            hints1,
            hints0,
        }
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        Self::new(bits.into_iter().collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.ones
    }

    pub fn count_zeros(&self) -> usize {
        self.len() - self.ones
    }

    pub fn bits(&self) -> &BitBuf {
        &self.bits
    }

    pub fn get(&self, pos: usize) -> Option<bool> {
        (pos < self.len()).then(|| self.bits.get(pos))
    }

    /// Number of ones in `[0, p)`.
    pub fn rank1(&self, p: usize) -> Result<usize> {
        if p > self.len() {
            return Err(Error::OutOfRange {
                index: p,
                len: self.len(),
            });
        }
        Ok(self.ones_before(p))
    }

    /// Number of zeros in `[0, p)`.
    pub fn rank0(&self, p: usize) -> Result<usize> {
        self.rank1(p).map(|r| p - r)
    }

    /// Unchecked [`rank1`](Self::rank1); panics if `p > len`.
    #[inline]
    pub fn ones_before(&self, p: usize) -> usize {
        assert!(p <= self.len(), "rank position {p} past length {}", self.len());
        let sb = p / SUPER_BITS;
        let mut r = self.super_ones(sb);
        let words = self.bits.words();
        let w_end = p / 64;
        for w in &words[sb * SUPER_WORDS..w_end] {
            r += w.count_ones() as usize;
        }
        let rem = p % 64;
        if rem > 0 {
            r += (words[w_end] & ((1u64 << rem) - 1)).count_ones() as usize;
        }
        r
    }

    #[inline]
    pub fn zeros_before(&self, p: usize) -> usize {
        p - self.ones_before(p)
    }

    #[inline]
    fn super_ones(&self, sb: usize) -> usize {
        if sb == 0 {
            0
        } else {
            self.super_ranks[sb - 1] as usize
        }
    }

    #[inline]
    fn super_count(&self, sb: usize, ones: bool) -> usize {
        let r = self.super_ones(sb);
        if ones {
            r
        } else {
            sb * SUPER_BITS - r
        }
    }

    /// Position of the `j`-th one (1-based), or `None` if there are fewer than `j`.
    pub fn select1(&self, j: usize) -> Option<usize> {
        self.select(j, true)
    }

    /// Position of the `j`-th zero (1-based), or `None` if there are fewer than `j`.
    pub fn select0(&self, j: usize) -> Option<usize> {
        self.select(j, false)
    }

    fn select(&self, j: usize, ones: bool) -> Option<usize> {
        let total = if ones { self.ones } else { self.count_zeros() };
        if j == 0 || j > total {
            return None;
        }
        let hints = if ones { &self.hints1 } else { &self.hints0 };
        let nsuper = self.len().div_ceil(SUPER_BITS);
        let slot = (j - 1) / SELECT_SAMPLE;
        let mut lo = if slot == 0 { 0 } else { hints[slot - 1] as usize };
        let mut hi = hints.get(slot).map_or(nsuper - 1, |&h| h as usize);
        // largest superblock whose preceding count is < j
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.super_count(mid, ones) < j {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let mut left = j - self.super_count(lo, ones);
        let words = self.bits.words();
        for (wi, &w) in words.iter().enumerate().skip(lo * SUPER_WORDS) {
            let w = if ones { w } else { !w };
            let c = w.count_ones() as usize;
            if c >= left {
                let pos = wi * 64 + select_in_word(w, left as u32 - 1) as usize;
                debug_assert!(pos < self.len());
                return Some(pos);
            }
            left -= c;
        }
        unreachable!("directory inconsistent with payload")
    }

    /// Bits held by the rank/select directory.
    pub fn directory_bits(&self) -> u64 {
        64 * self.super_ranks.len() as u64 + 32 * (self.hints1.len() + self.hints0.len()) as u64
    }

    /// Serialized size plus in-memory directory, in bits.
    pub fn size_bits(&self) -> u64 {
        serialized_bitbuf_bits(&self.bits) + self.directory_bits()
    }

    pub fn write(&self, w: &mut ByteWriter) {
        w.bitbuf(&self.bits);
    }

    pub fn read(r: &mut ByteReader<'_>) -> Result<Self> {
        Ok(Self::new(r.bitbuf()?))
    }
}

/// Position of the `k`-th (0-based) set bit of `w`.
#[inline]
fn select_in_word(mut w: u64, k: u32) -> u32 {
    for _ in 0..k {
        w &= w - 1;
    }
    w.trailing_zeros()
}
