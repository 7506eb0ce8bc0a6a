//! Monotone minimal perfect hashing over a sorted key set `T ⊆ [u]`.
//!
//! `eval(x)` returns the rank of `x` in `T` when `x ∈ T` and an arbitrary
//! value in `[0, m)` otherwise. Evaluation never touches the text.
//!
//! Keys are cut into buckets of `β = max(1, ⌈log2 u⌉)` consecutive keys. The
//! first key of every bucket but the first is stored explicitly and located by
//! binary search; the offset of a key inside its bucket comes from a seeded
//! hash found by brute force at build time:
//!
//! * buckets of size 2..=5 use a seed whose hash maps each key straight to its
//!   offset ("direct"), so no offset table is stored;
//! * larger buckets use a seed that is injective into `slots(s)` slots, and a
//!   table of `⌈log2 s⌉`-bit offsets indexed by slot;
//! * if no seed below 2^20 works the bucket keeps its keys verbatim.
//!
//! Seeds are stored Rice-coded as `seed + 1` (`0` marks the verbatim
//! fallback) with a parameter derived from the expected number of trials, so
//! a bucket costs a few bits more than the entropy of its seed.
//!
//! Encoded layout (with `m` and `u` supplied by the caller):
//!
//! ```text
//! m <= 1 : nothing
//! nb == 1: bucket record
//! nb >= 2: gamma(body_len + 1) | samples (nb-1) x ⌈log2 u⌉ | directory | bucket records
//! ```
//!
//! The directory is present only when there are more than `DIR_STRIDE`
//! buckets: a 6-bit width followed by the record offset of every
//! `DIR_STRIDE`-th bucket.

use crate::bitbuf::{bit_width, ceil_log2, BitBuf, BitCursor, ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const SEED_CAP: u64 = 1 << 20;
const DIRECT_MAX: usize = 5;
const MINIMAL_SLOTS_MAX: usize = 12;
const DIR_STRIDE: usize = 32;

/// Header of a standalone serialized [`MonotoneHash`]: `m`, `u` and the
/// payload bit length, 64 bits each.
pub const HEADER_BITS: u64 = 192;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded hash of `x` reduced to `[0, range)`.
#[inline]
fn hash_range(seed: u64, x: u64, range: usize) -> usize {
    let h = mix(x
        .wrapping_add(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x632b_e59b_d9b4_e019));
    (((h >> 32) * range as u64) >> 32) as usize
}

pub fn bucket_size(u: u64) -> usize {
    (ceil_log2(u) as usize).max(1)
}

fn key_width(u: u64) -> u32 {
    ceil_log2(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Single,
    Direct,
    Injective { slots: usize },
}

fn mode(s: usize) -> Mode {
    match s {
        0 | 1 => Mode::Single,
        2..=DIRECT_MAX => Mode::Direct,
        _ if s <= MINIMAL_SLOTS_MAX => Mode::Injective { slots: s },
        _ => Mode::Injective {
            slots: (3 * s).div_ceil(2),
        },
    }
}

/// Rice parameter close to optimal for a geometric seed distribution.
fn rice_k(s: usize) -> u32 {
    let expected_trials = match mode(s) {
        Mode::Single => return 0,
        Mode::Direct => (0..s).fold(1.0f64, |acc, _| acc * s as f64),
        Mode::Injective { slots } => {
            (0..s).fold(1.0f64, |acc, i| acc * slots as f64 / (slots - i) as f64)
        }
    };
    let scaled = (expected_trials * std::f64::consts::LN_2).min(SEED_CAP as f64) as u64;
    if scaled <= 1 {
        0
    } else {
        bit_width(scaled) - 1
    }
}

/// Encodes one bucket; returns whether it fell back to verbatim keys.
fn encode_bucket(keys: &[u64], kw: u32, out: &mut BitBuf) -> bool {
    let s = keys.len();
    let k = rice_k(s);
    match mode(s) {
        Mode::Single => false,
        Mode::Direct => {
            let seed = (0..SEED_CAP).find(|&seed| {
                keys.iter()
                    .enumerate()
                    .all(|(j, &x)| hash_range(seed, x, s) == j)
            });
            match seed {
                Some(seed) => {
                    out.push_rice(seed + 1, k);
                    false
                }
                None => {
                    push_verbatim(keys, kw, k, out);
                    true
                }
            }
        }
        Mode::Injective { slots } => {
            let mut used = vec![false; slots];
            let seed = (0..SEED_CAP).find(|&seed| {
                used.iter_mut().for_each(|u| *u = false);
                keys.iter().all(|&x| {
                    let slot = hash_range(seed, x, slots);
                    !std::mem::replace(&mut used[slot], true)
                })
            });
            match seed {
                Some(seed) => {
                    out.push_rice(seed + 1, k);
                    let ow = ceil_log2(s as u64);
                    let mut table = vec![0u64; slots];
                    for (j, &x) in keys.iter().enumerate() {
                        table[hash_range(seed, x, slots)] = j as u64;
                    }
                    for v in table {
                        out.push_bits(v, ow);
                    }
                    false
                }
                None => {
                    push_verbatim(keys, kw, k, out);
                    true
                }
            }
        }
    }
}

fn push_verbatim(keys: &[u64], kw: u32, k: u32, out: &mut BitBuf) {
    out.push_rice(0, k);
    for &x in keys {
        out.push_bits(x, kw);
    }
}

/// Reads one bucket record. With `probe = Some(x)` returns x's offset.
fn read_bucket(
    cur: &mut BitCursor<'_>,
    s: usize,
    kw: u32,
    probe: Option<u64>,
) -> Result<(usize, bool)> {
    let m = mode(s);
    if m == Mode::Single {
        return Ok((0, false));
    }
    let v = cur.read_rice(rice_k(s))?;
    if v == 0 {
        let base = cur.pos();
        cur.skip(s * kw as usize)?;
        let off = match probe {
            // number of stored keys below x; exact rank for members
            Some(x) => {
                let (mut lo, mut hi) = (0usize, s);
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    let mut c = cur.at(base + mid * kw as usize);
                    if c.read_bits(kw)? < x {
                        lo = mid + 1;
                    } else {
                        hi = mid;
                    }
                }
                lo.min(s - 1)
            }
            None => 0,
        };
        return Ok((off, true));
    }
    let seed = v - 1;
    match m {
        Mode::Single => unreachable!(),
        Mode::Direct => Ok((probe.map_or(0, |x| hash_range(seed, x, s)), false)),
        Mode::Injective { slots } => {
            let ow = ceil_log2(s as u64);
            let base = cur.pos();
            cur.skip(slots * ow as usize)?;
            let off = match probe {
                Some(x) => {
                    let slot = hash_range(seed, x, slots);
                    let mut c = cur.at(base + slot * ow as usize);
                    (c.read_bits(ow)? as usize).min(s - 1)
                }
                None => 0,
            };
            Ok((off, false))
        }
    }
}

/// Encodes the hash for `keys` (strictly increasing, all `< u`) into `out`.
/// Returns the number of buckets stored verbatim.
pub fn encode(keys: &[u64], u: u64, out: &mut BitBuf) -> Result<usize> {
    for (i, w) in keys.windows(2).enumerate() {
        if w[0] >= w[1] {
            return Err(Error::UnsortedKeys { position: i + 1 });
        }
    }
    if let Some(&last) = keys.last() {
        if last >= u {
            return Err(Error::InvalidParameter(format!(
                "key {last} outside universe of size {u}"
            )));
        }
    }
    let m = keys.len();
    if m <= 1 {
        return Ok(0);
    }
    let beta = bucket_size(u);
    let kw = key_width(u);
    let nb = m.div_ceil(beta);
    let mut fallbacks = 0;
    let mut records = BitBuf::new();
    let mut offsets = Vec::new();
    for (b, bucket) in keys.chunks(beta).enumerate() {
        if b > 0 && b % DIR_STRIDE == 0 {
            offsets.push(records.len() as u64);
        }
        fallbacks += encode_bucket(bucket, kw, &mut records) as usize;
    }
    if nb == 1 {
        out.extend_from(&records);
        return Ok(fallbacks);
    }
    let mut body = BitBuf::new();
    for bucket in keys.chunks(beta).skip(1) {
        body.push_bits(bucket[0], kw);
    }
    if nb > DIR_STRIDE {
        let dw = offsets.iter().copied().max().map_or(0, bit_width);
        body.push_bits(dw as u64, 6);
        for off in offsets {
            body.push_bits(off, dw);
        }
    }
    body.extend_from(&records);
    out.push_gamma(body.len() as u64 + 1);
    out.extend_from(&body);
    Ok(fallbacks)
}

/// Evaluates an encoded hash that starts at `start`.
pub fn eval_encoded(bits: &BitBuf, start: usize, m: usize, u: u64, x: u64) -> Result<usize> {
    if m <= 1 {
        return Ok(0);
    }
    let beta = bucket_size(u);
    let kw = key_width(u);
    let nb = m.div_ceil(beta);
    let mut cur = BitCursor::new(bits, start);
    if nb == 1 {
        return Ok(read_bucket(&mut cur, m, kw, Some(x))?.0);
    }
    let _body_len = cur.read_gamma()?;
    let samples = cur.pos();
    // bucket = number of stored bucket heads <= x
    let (mut lo, mut hi) = (0usize, nb - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if bits.try_get_bits(samples + mid * kw as usize, kw)? <= x {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    let bucket = lo;
    cur.seek(samples + (nb - 1) * kw as usize);
    let mut first = 0;
    if nb > DIR_STRIDE {
        let dw = cur.read_bits(6)? as u32;
        let entries = cur.pos();
        let records = entries + ((nb - 1) / DIR_STRIDE) * dw as usize;
        first = (bucket / DIR_STRIDE) * DIR_STRIDE;
        let rel = if first == 0 {
            0
        } else {
            bits.try_get_bits(entries + (first / DIR_STRIDE - 1) * dw as usize, dw)? as usize
        };
        cur.seek(records + rel);
    }
    let size = |b: usize| if b + 1 == nb { m - b * beta } else { beta };
    for b in first..bucket {
        read_bucket(&mut cur, size(b), kw, None)?;
    }
    let (off, _) = read_bucket(&mut cur, size(bucket), kw, Some(x))?;
    Ok(bucket * beta + off)
}

/// Parses past an encoded hash; returns the end position and the number of
/// verbatim buckets.
pub fn skip_encoded(bits: &BitBuf, start: usize, m: usize, u: u64) -> Result<(usize, usize)> {
    if m <= 1 {
        return Ok((start, 0));
    }
    let beta = bucket_size(u);
    let kw = key_width(u);
    let nb = m.div_ceil(beta);
    let mut cur = BitCursor::new(bits, start);
    if nb == 1 {
        let (_, fb) = read_bucket(&mut cur, m, kw, None)?;
        return Ok((cur.pos(), fb as usize));
    }
    let body_len = cur.read_gamma()? as usize - 1;
    let end = cur.pos() + body_len;
    if end > bits.len() {
        return Err(Error::Corrupt("hash body past end of stream".into()));
    }
    Ok((end, 0))
}

/// Counts verbatim buckets of an encoded hash, validating the whole record.
pub fn audit_encoded(bits: &BitBuf, start: usize, m: usize, u: u64) -> Result<(usize, usize)> {
    if m <= 1 {
        return Ok((start, 0));
    }
    let beta = bucket_size(u);
    let kw = key_width(u);
    let nb = m.div_ceil(beta);
    let mut cur = BitCursor::new(bits, start);
    let mut end = None;
    if nb > 1 {
        let body_len = cur.read_gamma()? as usize - 1;
        end = Some(cur.pos() + body_len);
        cur.skip((nb - 1) * kw as usize)?;
        if nb > DIR_STRIDE {
            let dw = cur.read_bits(6)? as usize;
            cur.skip((nb - 1) / DIR_STRIDE * dw)?;
        }
    }
    let mut fallbacks = 0;
    for b in 0..nb {
        let s = if b + 1 == nb { m - b * beta } else { beta };
        fallbacks += read_bucket(&mut cur, s, kw, None)?.1 as usize;
    }
    if end.is_some_and(|e| e != cur.pos()) {
        return Err(Error::Corrupt("hash body length mismatch".into()));
    }
    Ok((cur.pos(), fallbacks))
}

/// A standalone monotone minimal perfect hash function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotoneHash {
    m: usize,
    u: u64,
    payload: BitBuf,
    fallbacks: usize,
}

impl MonotoneHash {
    /// Builds the hash for strictly increasing `keys`, all below `u`.
    pub fn build(keys: &[u64], u: u64) -> Result<Self> {
        let mut payload = BitBuf::new();
        let fallbacks = encode(keys, u, &mut payload)?;
        Ok(Self {
            m: keys.len(),
            u,
            payload,
            fallbacks,
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn universe(&self) -> u64 {
        self.u
    }

    /// Buckets that could not be hashed and store their keys verbatim.
    pub fn fallback_buckets(&self) -> usize {
        self.fallbacks
    }

    pub fn payload_bits(&self) -> usize {
        self.payload.len()
    }

    /// Rank of `x` in the key set if `x` is a key; some value in `[0, m)` otherwise.
    pub fn eval(&self, x: u64) -> usize {
        eval_encoded(&self.payload, 0, self.m, self.u, x).expect("payload built by encode")
    }

    /// Exact serialized size in bits.
    pub fn bits(&self) -> u64 {
        HEADER_BITS + 64 * self.payload.words().len() as u64
    }

    pub fn write(&self, w: &mut ByteWriter) {
        w.u64(self.m as u64);
        w.u64(self.u);
        w.bitbuf(&self.payload);
    }

    pub fn read(r: &mut ByteReader<'_>) -> Result<Self> {
        let m = usize::try_from(r.u64()?).map_err(|_| Error::Corrupt("key count".into()))?;
        let u = r.u64()?;
        let payload = r.bitbuf()?;
        if m as u64 > u {
            return Err(Error::Corrupt(format!("{m} keys in universe {u}")));
        }
        let (end, fallbacks) = audit_encoded(&payload, 0, m, u)?;
        if end != payload.len() {
            return Err(Error::Corrupt("payload length mismatch".into()));
        }
        Ok(Self {
            m,
            u,
            payload,
            fallbacks,
        })
    }
}
