//! Elias-Fano encoded increasing sequence with membership-rank lookups.

use crate::bitbuf::{serialized_bitbuf_bits, BitBuf, ByteReader, ByteWriter};
use crate::bits::RsBitvector;
use crate::error::{Error, Result};

/// A sorted set over `[0, universe)`. Each member keeps its low `l` bits
/// verbatim; the high parts are stored as unary gaps in `high`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseSet {
    universe: usize,
    len: usize,
    low_width: u32,
    high: RsBitvector,
    low: BitBuf,
}

fn low_width(universe: usize, len: usize) -> u32 {
    if len == 0 || universe <= len {
        0
    } else {
        (universe / len).ilog2()
    }
}

impl SparseSet {
    /// Encodes strictly increasing `members`, all `< universe`.
    pub fn new(members: &[usize], universe: usize) -> Result<Self> {
        if let Some(i) = members.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedKeys { position: i + 1 });
        }
        if members.last().is_some_and(|&x| x >= universe) {
            return Err(Error::InvalidParameter("member outside universe".into()));
        }
        let len = members.len();
        let l = low_width(universe, len);
        let mut high = BitBuf::new();
        let mut low = BitBuf::new();
        let mut bucket = 0;
        for &x in members {
            let h = x >> l;
            high.push_run(false, h - bucket);
            high.push(true);
            bucket = h;
            low.push_bits((x & ((1 << l) - 1)) as u64, l);
        }
        high.push_run(false, (universe >> l) - bucket + 1);
        Ok(Self {
            universe,
            len,
            low_width: l,
            high: RsBitvector::new(high),
            low,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    /// First member index and position in `high` of the bucket holding `x`.
    fn bucket(&self, x: usize) -> (usize, usize) {
        let h = x >> self.low_width;
        if h == 0 {
            return (0, 0);
        }
        let zero = self.high.select0(h).expect("bucket boundary present");
        (zero + 1 - h, zero + 1)
    }

    fn low_at(&self, i: usize) -> usize {
        let l = self.low_width;
        self.low.get_bits(i * l as usize, l) as usize
    }

    /// Index of `x` among the members, or `None` if `x` is not a member.
    pub fn position(&self, x: usize) -> Option<usize> {
        if x >= self.universe {
            return None;
        }
        let target = x & ((1 << self.low_width) - 1);
        let (mut i, mut p) = self.bucket(x);
        while self.high.bits().get(p) {
            let lo = self.low_at(i);
            if lo >= target {
                return (lo == target).then_some(i);
            }
            i += 1;
            p += 1;
        }
        None
    }

    /// Members `< x`.
    pub fn rank(&self, x: usize) -> usize {
        if x >= self.universe {
            return self.len;
        }
        let target = x & ((1 << self.low_width) - 1);
        let (mut i, mut p) = self.bucket(x);
        while self.high.bits().get(p) && self.low_at(i) < target {
            i += 1;
            p += 1;
        }
        i
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let mut p = 0;
        (0..self.len).map(move |i| {
            while !self.high.bits().get(p) {
                p += 1;
            }
            let h = p - i;
            p += 1;
            h << self.low_width | self.low_at(i)
        })
    }

    /// Serialized size plus the high-part directory.
    pub fn size_bits(&self) -> u64 {
        128 + self.high.size_bits() + serialized_bitbuf_bits(&self.low)
    }

    pub fn write(&self, w: &mut ByteWriter) {
        w.u64(self.universe as u64);
        w.u64(self.len as u64);
        self.high.write(w);
        w.bitbuf(&self.low);
    }

    pub fn read(r: &mut ByteReader<'_>) -> Result<Self> {
        let universe = usize::try_from(r.u64()?).map_err(|_| Error::Truncated)?;
        let len = usize::try_from(r.u64()?).map_err(|_| Error::Truncated)?;
        let high = RsBitvector::read(r)?;
        let low = r.bitbuf()?;
        let l = low_width(universe, len);
        if len > universe
            || high.count_ones() != len
            || high.len() != len + (universe >> l) + 1
            || high.bits().get(high.len() - 1)
            || low.len() != len * l as usize
        {
            return Err(Error::Corrupt("sparse set shape mismatch".into()));
        }
        let set = Self {
            universe,
            len,
            low_width: l,
            high,
            low,
        };
        // members must be strictly increasing and inside the universe
        let mut prev = None;
        for x in set.iter() {
            if x >= universe || prev.is_some_and(|p| p >= x) {
                return Err(Error::Corrupt("sparse set out of order".into()));
            }
            prev = Some(x);
        }
        Ok(set)
    }
}
