//! Growable packed bit buffer, fixed-width fields and the two universal codes
//! (Elias gamma, Rice) used by the variable-length records.
//!
//! Bits are stored least-significant first within each `u64` word. A
//! multi-bit field of width `w` occupies positions `[pos, pos + w)` and its
//! value's bit `i` lives at position `pos + i`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitBuf {
    words: Vec<u64>,
    len: usize,
}

/// Number of bits needed to write `v` in binary (`0` for `v == 0`).
#[inline]
pub fn bit_width(v: u64) -> u32 {
    64 - v.leading_zeros()
}

/// `ceil(log2(x))` for `x >= 1`; `0` for `x <= 1`.
#[inline]
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        bit_width(x - 1)
    }
}

#[inline]
fn mask(width: u32) -> u64 {
    if width == 64 {
        !0
    } else {
        (1u64 << width) - 1
    }
}

impl BitBuf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Result<Self> {
        if words.len() != len.div_ceil(64) {
            return Err(Error::Corrupt(format!(
                "{} words cannot hold exactly {len} bits",
                words.len()
            )));
        }
        let mut buf = Self { words, len };
        // padding must be zero so equal contents serialize identically
        if len % 64 != 0 {
            let last = buf.words.last_mut().expect("len > 0");
            if *last & !mask((len % 64) as u32) != 0 {
                return Err(Error::Corrupt("non-zero padding bits".into()));
            }
        }
        buf.words.shrink_to_fit();
        Ok(buf)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn push(&mut self, bit: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        if bit {
            self.words[self.len / 64] |= 1 << (self.len % 64);
        }
        self.len += 1;
    }

    /// Appends the low `width` bits of `value`.
    pub fn push_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        if width == 0 {
            return;
        }
        debug_assert!(width == 64 || value >> width == 0, "{value} wider than {width}");
        let value = value & mask(width);
        let off = (self.len % 64) as u32;
        if off == 0 {
            self.words.push(value);
        } else {
            *self.words.last_mut().unwrap() |= value << off;
            if off + width > 64 {
                self.words.push(value >> (64 - off));
            }
        }
        self.len += width as usize;
    }

    pub fn push_run(&mut self, bit: bool, count: usize) {
        let fill = if bit { !0 } else { 0 };
        let mut left = count;
        while left >= 64 {
            self.push_bits(fill, 64);
            left -= 64;
        }
        self.push_bits(fill & mask(left as u32), left as u32);
    }

    pub fn extend_from(&mut self, other: &BitBuf) {
        let full = other.len / 64;
        for &w in &other.words[..full] {
            self.push_bits(w, 64);
        }
        let rest = (other.len % 64) as u32;
        if rest > 0 {
            self.push_bits(other.words[full], rest);
        }
    }

    #[inline]
    pub fn get(&self, pos: usize) -> bool {
        debug_assert!(pos < self.len);
        self.words[pos / 64] >> (pos % 64) & 1 == 1
    }

    /// Reads `width` bits starting at `pos`. Panics if the range is out of bounds.
    #[inline]
    pub fn get_bits(&self, pos: usize, width: u32) -> u64 {
        if width == 0 {
            return 0;
        }
        assert!(pos + width as usize <= self.len, "bit range out of bounds");
        let word = pos / 64;
        let off = (pos % 64) as u32;
        let mut v = self.words[word] >> off;
        if off + width > 64 {
            v |= self.words[word + 1] << (64 - off);
        }
        v & mask(width)
    }

    /// Fallible variant of [`get_bits`](Self::get_bits) for parsing untrusted streams.
    pub fn try_get_bits(&self, pos: usize, width: u32) -> Result<u64> {
        if pos.checked_add(width as usize).is_none_or(|end| end > self.len) {
            return Err(Error::Corrupt(format!(
                "read of {width} bits at {pos} past end of {}-bit stream",
                self.len
            )));
        }
        Ok(self.get_bits(pos, width))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Elias gamma code of `value >= 1`: `floor(log2 v)` zeros, then `v` in
    /// binary most-significant bit first.
    pub fn push_gamma(&mut self, value: u64) {
        assert!(value >= 1, "gamma code needs a positive value");
        let width = bit_width(value);
        self.push_run(false, width as usize - 1);
        for i in (0..width).rev() {
            self.push(value >> i & 1 == 1);
        }
    }

    /// Rice code with parameter `k`: quotient in unary (ones closed by a zero),
    /// then the `k` low bits.
    pub fn push_rice(&mut self, value: u64, k: u32) {
        let q = value >> k;
        self.push_run(true, q as usize);
        self.push(false);
        self.push_bits(value & mask(k), k);
    }
}

impl FromIterator<bool> for BitBuf {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut buf = BitBuf::new();
        for b in iter {
            buf.push(b);
        }
        buf
    }
}

/// Sequential reader over a [`BitBuf`]. All reads are bounds-checked and
/// report [`Error::Corrupt`] instead of panicking.
#[derive(Debug, Clone)]
pub struct BitCursor<'a> {
    bits: &'a BitBuf,
    pos: usize,
}

impl<'a> BitCursor<'a> {
    pub fn new(bits: &'a BitBuf, pos: usize) -> Self {
        Self { bits, pos }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    /// A second cursor over the same stream, positioned at `pos`.
    pub fn at(&self, pos: usize) -> BitCursor<'a> {
        BitCursor {
            bits: self.bits,
            pos,
        }
    }

    pub fn seek(&mut self, pos: usize) {
        self.pos = pos;
    }

    pub fn skip(&mut self, nbits: usize) -> Result<()> {
        let end = self.pos.checked_add(nbits).filter(|&e| e <= self.bits.len());
        self.pos = end.ok_or_else(|| Error::Corrupt("skip past end of stream".into()))?;
        Ok(())
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        Ok(self.read_bits(1)? == 1)
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64> {
        let v = self.bits.try_get_bits(self.pos, width)?;
        self.pos += width as usize;
        Ok(v)
    }

    pub fn read_gamma(&mut self) -> Result<u64> {
        let mut zeros = 0u32;
        while !self.read_bit()? {
            zeros += 1;
            if zeros >= 64 {
                return Err(Error::Corrupt("gamma code too long".into()));
            }
        }
        let mut v = 1u64;
        for _ in 0..zeros {
            v = v << 1 | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_rice(&mut self, k: u32) -> Result<u64> {
        let mut q = 0u64;
        while self.read_bit()? {
            q += 1;
        }
        let low = self.read_bits(k)?;
        q.checked_shl(k)
            .filter(|v| v >> k == q)
            .map(|v| v | low)
            .ok_or_else(|| Error::Corrupt("rice code overflows".into()))
    }
}

/// Little-endian byte sink used by every serializer in the crate.
#[derive(Debug, Default)]
pub struct ByteWriter {
    pub bytes: Vec<u8>,
}

impl ByteWriter {
    pub fn u8(&mut self, v: u8) {
        self.bytes.push(v);
    }
    pub fn u32(&mut self, v: u32) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }
    /// 64-bit bit length, then the payload words.
    pub fn bitbuf(&mut self, b: &BitBuf) {
        self.u64(b.len() as u64);
        for &w in b.words() {
            self.u64(w);
        }
    }
}

/// Little-endian byte source; every read fails with [`Error::Truncated`] at EOF.
#[derive(Debug)]
pub struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(Error::Truncated)?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn bitbuf(&mut self) -> Result<BitBuf> {
        let len = usize::try_from(self.u64()?).map_err(|_| Error::Truncated)?;
        let nwords = len.div_ceil(64);
        if nwords.checked_mul(8).is_none_or(|b| b > self.remaining()) {
            return Err(Error::Truncated);
        }
        let words = (0..nwords).map(|_| self.u64()).collect::<Result<Vec<_>>>()?;
        BitBuf::from_words(words, len)
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Corrupt(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

/// Serialized size in bits of a [`BitBuf`] written by [`ByteWriter::bitbuf`].
pub fn serialized_bitbuf_bits(b: &BitBuf) -> u64 {
    64 + 64 * b.words().len() as u64
}
