//! Rank over a set `T ⊆ [σ]` whose members can only be fetched through a
//! costly accessor `S(i)` (the `i`-th smallest member).
//!
//! Every `g`-th member (`g = ⌈log2 σ⌉`) is stored explicitly and binary
//! searched without calling `S`; this splits `T` into buckets of `g`
//! members. Inside a bucket, every `k`-th member is a *sample*. Buckets with
//! at least [`TRIE_MIN`] samples index them with a [`BlindTrie`], which finds
//! the predecessor sample with a single `S` call; smaller buckets binary
//! search their samples directly, which also stays within three calls. A
//! final binary search over the at most `k - 1` members that follow the
//! predecessor sample finishes the query, so one query costs at most
//! `3 + ⌈log2 k⌉` calls to `S`.
//!
//! The first member of bucket 0 is never stored, so sets with fewer than
//! `g + 1` members and fewer than `TRIE_MIN` samples take no space at all.

use crate::bitbuf::{ceil_log2, serialized_bitbuf_bits, BitBuf, BitCursor, ByteReader, ByteWriter};
use crate::error::{Error, Result};

/// Smallest sample count that gets a trie.
pub const TRIE_MIN: usize = 8;

/// Bucket size `g = max(1, ⌈log2 σ⌉)`, also the key width.
pub fn top_rate(sigma: u64) -> usize {
    (ceil_log2(sigma) as usize).max(1)
}

fn key_width(sigma: u64) -> u32 {
    ceil_log2(sigma).max(1)
}

/// Width of a sampled rank inside a trie.
fn rank_width(g: usize, k: usize) -> u32 {
    ceil_log2(g.div_ceil(k) as u64 + 1)
}

/// Upper bound on `S` calls for one [`rank_encoded`] query.
pub fn s_call_budget(k: usize) -> u64 {
    3 + ceil_log2(k as u64) as u64
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf { rank: usize },
    Inner { depth: u32, min: usize, max: usize, right: usize },
}

/// A compacted binary trie over `w`-bit sample keys that stores only
/// branching depths and leaf ranks. The keys themselves stay outside and are
/// fetched on demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlindTrie {
    w: u32,
    rank_width: u32,
    leaves: usize,
    bits: BitBuf,
}

/// Encoded size of a trie with `leaves` leaves.
pub fn trie_bits(leaves: usize, w: u32, rank_width: u32) -> usize {
    if leaves == 0 {
        return 0;
    }
    let skip_width = ceil_log2(w as u64) as usize;
    let rw = rank_width as usize;
    (2 * leaves - 1) + (leaves - 1) * (skip_width + 2 * rw) + leaves * rw
}

fn encode_trie(keys: &[u64], first_rank: usize, parent: Option<u32>, w: u32, rw: u32, out: &mut BitBuf) {
    if keys.len() == 1 {
        out.push(false);
        out.push_bits(first_rank as u64, rw);
        return;
    }
    let diff = keys[0] ^ keys[keys.len() - 1];
    let msb = 63 - diff.leading_zeros();
    let depth = w - 1 - msb;
    let skip = parent.map_or(depth, |pd| depth - pd - 1);
    let split = keys.partition_point(|&x| x >> msb & 1 == 0);
    out.push(true);
    out.push_bits(skip as u64, ceil_log2(w as u64));
    out.push_bits(first_rank as u64, rw);
    out.push_bits((first_rank + keys.len() - 1) as u64, rw);
    encode_trie(&keys[..split], first_rank, Some(depth), w, rw, out);
    encode_trie(&keys[split..], first_rank + split, Some(depth), w, rw, out);
}

fn decode_trie(bits: &BitBuf, start: usize, leaves: usize, w: u32, rw: u32) -> Result<Vec<Node>> {
    let mut nodes = Vec::with_capacity(2 * leaves);
    let mut cur = BitCursor::new(bits, start);
    let skip_width = ceil_log2(w as u64);
    // (node index, child depth base) of inner nodes awaiting their right child
    let mut pending: Vec<(usize, Option<u32>)> = Vec::new();
    let mut parent_depth: Option<u32> = None;
    for _ in 0..2 * leaves - 1 {
        let index = nodes.len();
        if cur.read_bit()? {
            let skip = cur.read_bits(skip_width)? as u32;
            let depth = parent_depth.map_or(skip, |pd| pd + 1 + skip);
            let min = cur.read_bits(rw)? as usize;
            let max = cur.read_bits(rw)? as usize;
            if depth >= w || min > max || max >= leaves {
                return Err(Error::Corrupt("trie node out of range".into()));
            }
            nodes.push(Node::Inner { depth, min, max, right: 0 });
            pending.push((index, Some(depth)));
            parent_depth = Some(depth);
        } else {
            let rank = cur.read_bits(rw)? as usize;
            if rank >= leaves {
                return Err(Error::Corrupt("trie leaf rank out of range".into()));
            }
            nodes.push(Node::Leaf { rank });
            // the next node is the right child of the deepest inner node
            // whose right child has not been seen yet
            match pending.pop() {
                Some((inner, depth)) => {
                    if let Node::Inner { right, .. } = &mut nodes[inner] {
                        *right = index + 1;
                    }
                    parent_depth = depth;
                }
                None => parent_depth = None,
            }
        }
    }
    if !pending.is_empty() {
        return Err(Error::Corrupt("unterminated trie".into()));
    }
    Ok(nodes)
}

#[inline]
fn bit_at_depth(x: u64, depth: u32, w: u32) -> bool {
    x >> (w - 1 - depth) & 1 == 1
}

/// Blind predecessor search over an encoded trie. Returns the rank of the
/// largest sample key `< p`, calling `fetch` exactly once.
pub fn trie_predecessor_encoded<F>(
    bits: &BitBuf,
    start: usize,
    leaves: usize,
    w: u32,
    rw: u32,
    p: u64,
    mut fetch: F,
) -> Result<Option<usize>>
where
    F: FnMut(usize) -> Result<u64>,
{
    if leaves == 0 || p == 0 {
        return Ok(None);
    }
    if w < 64 && p >> w != 0 {
        return Ok(Some(leaves - 1));
    }
    let nodes = decode_trie(bits, start, leaves, w, rw)?;
    // first pass: follow p's bits to a leaf
    let mut v = 0;
    let leaf_rank = loop {
        match nodes[v] {
            Node::Leaf { rank } => break rank,
            Node::Inner { depth, right, .. } => {
                v = if bit_at_depth(p, depth, w) { right } else { v + 1 };
            }
        }
    };
    let key = fetch(leaf_rank)?;
    if key == p {
        return Ok(leaf_rank.checked_sub(1));
    }
    let diff = key ^ p;
    if w < 64 && diff >> w != 0 {
        return Err(Error::Corrupt("fetched key wider than trie keys".into()));
    }
    let split = w - 1 - (63 - diff.leading_zeros());
    // second pass: stop at the subtree whose keys all diverge from p at `split`
    let mut v = 0;
    let (min, max) = loop {
        match nodes[v] {
            Node::Leaf { rank } => break (rank, rank),
            Node::Inner { depth, min, max, right } => {
                if depth >= split {
                    break (min, max);
                }
                v = if bit_at_depth(p, depth, w) { right } else { v + 1 };
            }
        }
    };
    if bit_at_depth(p, split, w) {
        Ok(Some(max))
    } else {
        Ok(min.checked_sub(1))
    }
}

impl BlindTrie {
    /// Builds a trie over strictly increasing `w`-bit `keys`; leaf `i` holds rank `i`.
    pub fn build(keys: &[u64], w: u32, rank_width: u32) -> Result<Self> {
        if w == 0 || w > 64 {
            return Err(Error::InvalidParameter(format!("key width {w}")));
        }
        check_sorted(keys)?;
        if keys.iter().any(|&x| w < 64 && x >> w != 0) {
            return Err(Error::InvalidParameter(format!("key wider than {w} bits")));
        }
        if ceil_log2(keys.len() as u64 + 1) > rank_width {
            return Err(Error::InvalidParameter("rank width too small".into()));
        }
        let mut bits = BitBuf::new();
        if !keys.is_empty() {
            encode_trie(keys, 0, None, w, rank_width, &mut bits);
        }
        debug_assert_eq!(bits.len(), trie_bits(keys.len(), w, rank_width));
        Ok(Self {
            w,
            rank_width,
            leaves: keys.len(),
            bits,
        })
    }

    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn node_count(&self) -> usize {
        (2 * self.leaves).saturating_sub(1)
    }

    /// Rank of the largest key `< p`, fetching keys by rank through `fetch`.
    pub fn predecessor<F>(&self, p: u64, fetch: F) -> Result<Option<usize>>
    where
        F: FnMut(usize) -> Result<u64>,
    {
        trie_predecessor_encoded(&self.bits, 0, self.leaves, self.w, self.rank_width, p, fetch)
    }

    pub fn bits(&self) -> u64 {
        self.bits.len() as u64
    }
}

fn check_sorted(keys: &[u64]) -> Result<()> {
    match keys.windows(2).position(|w| w[0] >= w[1]) {
        Some(i) => Err(Error::UnsortedKeys { position: i + 1 }),
        None => Ok(()),
    }
}

/// Parameters shared by the encoder and the query.
#[derive(Debug, Clone, Copy)]
struct Layout {
    m: usize,
    g: usize,
    k: usize,
    w: u32,
    rw: u32,
    buckets: usize,
    /// Trie size for a full bucket, or 0 if full buckets have no trie.
    full_trie: usize,
}

impl Layout {
    fn new(m: usize, sigma: u64, k: usize) -> Self {
        let g = top_rate(sigma);
        let w = key_width(sigma);
        let rw = rank_width(g, k);
        let full_samples = g.div_ceil(k);
        Self {
            m,
            g,
            k,
            w,
            rw,
            buckets: m.div_ceil(g),
            full_trie: if full_samples >= TRIE_MIN {
                trie_bits(full_samples, w, rw)
            } else {
                0
            },
        }
    }

    fn bucket_len(&self, b: usize) -> usize {
        (self.m - b * self.g).min(self.g)
    }

    fn samples(&self, b: usize) -> usize {
        self.bucket_len(b).div_ceil(self.k)
    }

    fn top_bits(&self) -> usize {
        self.buckets.saturating_sub(1) * self.w as usize
    }

    /// Offset (relative to the record start) of bucket `b`'s trie.
    fn trie_offset(&self, b: usize) -> usize {
        self.top_bits() + b * self.full_trie
    }

    fn total_bits(&self) -> usize {
        if self.buckets == 0 {
            return 0;
        }
        let last = self.buckets - 1;
        let last_samples = self.samples(last);
        let last_trie = if last_samples >= TRIE_MIN {
            trie_bits(last_samples, self.w, self.rw)
        } else {
            0
        };
        self.top_bits() + last * self.full_trie + last_trie
    }
}

fn check_params(sigma: u64, k: usize) -> Result<()> {
    let g = top_rate(sigma);
    if sigma < 2 {
        return Err(Error::InvalidParameter(format!("sigma {sigma} < 2")));
    }
    if k == 0 || k > g {
        return Err(Error::InvalidParameter(format!(
            "k = {k} outside [1, {g}] for sigma {sigma}"
        )));
    }
    Ok(())
}

/// Encoded size of the structure for `m` members; depends only on the
/// parameters, never on the members themselves.
pub fn encoded_bits(m: usize, sigma: u64, k: usize) -> usize {
    Layout::new(m, sigma, k).total_bits()
}

/// Encodes the structure for strictly increasing `members`, all `< sigma`.
pub fn encode(members: &[u64], sigma: u64, k: usize, out: &mut BitBuf) -> Result<()> {
    check_params(sigma, k)?;
    check_sorted(members)?;
    if members.last().is_some_and(|&x| x >= sigma) {
        return Err(Error::InvalidParameter("member outside [0, sigma)".into()));
    }
    let lay = Layout::new(members.len(), sigma, k);
    let start = out.len();
    for bucket in members.chunks(lay.g).skip(1) {
        out.push_bits(bucket[0], lay.w);
    }
    for bucket in members.chunks(lay.g) {
        if bucket.len().div_ceil(k) >= TRIE_MIN {
            let samples: Vec<u64> = bucket.iter().step_by(k).copied().collect();
            encode_trie(&samples, 0, None, lay.w, lay.rw, out);
        }
    }
    debug_assert_eq!(out.len() - start, lay.total_bits());
    Ok(())
}

/// `R(p) = |{x ∈ T : x < p}|` for an encoded structure starting at `start`.
///
/// `member(i)` must return the `i`-th smallest member of `T`.
#[allow(clippy::too_many_arguments)]
pub fn rank_encoded<F>(
    bits: &BitBuf,
    start: usize,
    m: usize,
    sigma: u64,
    k: usize,
    p: u64,
    mut member: F,
) -> Result<usize>
where
    F: FnMut(usize) -> Result<u64>,
{
    if m == 0 || p == 0 {
        return Ok(0);
    }
    if p >= sigma {
        return Ok(m);
    }
    let lay = Layout::new(m, sigma, k);
    let w = lay.w;
    // bucket = number of stored bucket heads < p
    let (mut lo, mut hi) = (0usize, lay.buckets - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if bits.try_get_bits(start + mid * w as usize, w)? < p {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    let bucket = lo;
    let head = if bucket > 0 {
        Some(bits.try_get_bits(start + (bucket - 1) * w as usize, w)?)
    } else {
        None
    };
    let first = bucket * lay.g;
    let end = first + lay.bucket_len(bucket);
    let samples = lay.samples(bucket);
    let mut sample_key = |j: usize| -> Result<u64> {
        match (j, head) {
            (0, Some(h)) => Ok(h),
            _ => member(first + j * k),
        }
    };

    let pred_sample = if samples >= TRIE_MIN {
        trie_predecessor_encoded(
            bits,
            start + lay.trie_offset(bucket),
            samples,
            w,
            lay.rw,
            p,
            &mut sample_key,
        )?
    } else {
        // first sample >= p; sample 0 of a later bucket is known to be < p
        let (mut lo, mut hi) = (usize::from(head.is_some()), samples);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if sample_key(mid)? < p {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo.checked_sub(1)
    };
    let Some(j) = pred_sample else {
        return Ok(first);
    };
    // members strictly between the predecessor sample and the next one
    let (mut lo, mut hi) = (first + j * k + 1, (first + (j + 1) * k).min(end));
    while lo < hi {
        let mid = (lo + hi) / 2;
        if member(mid)? < p {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// A standalone rank structure over a set of positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredIndex {
    m: usize,
    sigma: u64,
    k: usize,
    payload: BitBuf,
}

impl PredIndex {
    /// Builds over strictly increasing `members` in `[0, sigma)` with sampling rate `k`.
    pub fn build(members: &[u64], sigma: u64, k: usize) -> Result<Self> {
        let mut payload = BitBuf::new();
        encode(members, sigma, k, &mut payload)?;
        Ok(Self {
            m: members.len(),
            sigma,
            k,
            payload,
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Count of members `< p`, with `member(i)` returning the `i`-th smallest member.
    pub fn rank<F>(&self, p: u64, member: F) -> Result<usize>
    where
        F: FnMut(usize) -> Result<u64>,
    {
        rank_encoded(&self.payload, 0, self.m, self.sigma, self.k, p, member)
    }

    /// Bits spent on tries (excluding the explicit bucket heads).
    pub fn trie_bits(&self) -> u64 {
        let lay = Layout::new(self.m, self.sigma, self.k);
        (lay.total_bits() - lay.top_bits()) as u64
    }

    /// Exact serialized size in bits.
    pub fn bits(&self) -> u64 {
        192 + serialized_bitbuf_bits(&self.payload)
    }

    pub fn write(&self, w: &mut ByteWriter) {
        w.u64(self.m as u64);
        w.u64(self.sigma);
        w.u64(self.k as u64);
        w.bitbuf(&self.payload);
    }

    pub fn read(r: &mut ByteReader<'_>) -> Result<Self> {
        let m = r.u64()? as usize;
        let sigma = r.u64()?;
        let k = r.u64()? as usize;
        check_params(sigma, k)?;
        let payload = r.bitbuf()?;
        if m as u64 > sigma || payload.len() != encoded_bits(m, sigma, k) {
            return Err(Error::Corrupt("rank structure size mismatch".into()));
        }
        Ok(Self {
            m,
            sigma,
            k,
            payload,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{seq::index::sample, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Checks R(p) for every p in [0, sigma], and the S-call budget.
    fn check_all(members: &[u64], sigma: u64, k: usize) -> PredIndex {
        let ix = PredIndex::build(members, sigma, k).unwrap();
        for p in 0..=sigma {
            let mut calls = 0;
            let r = ix
                .rank(p, |i| {
                    calls += 1;
                    Ok(members[i])
                })
                .unwrap();
            let expect = members.iter().filter(|&&x| x < p).count();
            assert_eq!(r, expect, "T={members:?} sigma={sigma} k={k} p={p}");
            assert!(calls <= s_call_budget(k), "{calls} calls for k={k}");
            if k == 1 {
                assert!(calls <= 3);
            }
        }
        ix
    }

    fn random_set(m: usize, sigma: u64, seed: u64) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<u64> = sample(&mut rng, sigma as usize, m)
            .into_iter()
            .map(|x| x as u64)
            .collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn small_examples() {
        let ix = check_all(&[1, 2], 3, 1);
        assert_eq!(ix.rank(1, |i| Ok([1, 2][i])).unwrap(), 0);
        check_all(&[1], 3, 1);
        assert_eq!(
            PredIndex::build(&[1], 3, 1).unwrap().rank(3, |_| Ok(1)).unwrap(),
            1
        );
        let ix = check_all(&[], 8, 2);
        assert_eq!(ix.bits(), 192 + 64);
    }

    #[test]
    fn dense_sixteen() {
        let members: Vec<u64> = (0..16).collect();
        let ix = check_all(&members, 16, 2);
        // three explicit heads of 4 bits, no tries (2 samples per bucket)
        assert_eq!(encoded_bits(16, 16, 2), 12);
        assert_eq!(ix.trie_bits(), 0);
    }

    #[test]
    fn exhaustive_subsets_up_to_sigma_ten() {
        for sigma in 2u64..=10 {
            let g = top_rate(sigma);
            for mask in 0u32..1 << sigma {
                let members: Vec<u64> = (0..sigma).filter(|&i| mask >> i & 1 == 1).collect();
                for k in 1..=g {
                    check_all(&members, sigma, k);
                }
            }
        }
    }

    #[test]
    fn large_sets_use_tries() {
        let sigma = 1u64 << 16;
        for k in [1usize, 2, 3] {
            let members = random_set(300, sigma, k as u64);
            let ix = PredIndex::build(&members, sigma, k).unwrap();
            assert_eq!(ix.trie_bits() > 0, k <= 2);
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            use rand::Rng;
            for _ in 0..3000 {
                let p = rng.gen_range(0..=sigma);
                let mut calls = 0;
                let r = ix
                    .rank(p, |i| {
                        calls += 1;
                        Ok(members[i])
                    })
                    .unwrap();
                assert_eq!(r, members.partition_point(|&x| x < p));
                assert!(calls <= s_call_budget(k));
            }
            // every member and its neighbours
            for &x in &members {
                for p in [x, x + 1, x.saturating_sub(1)] {
                    let r = ix.rank(p, |i| Ok(members[i])).unwrap();
                    assert_eq!(r, members.partition_point(|&y| y < p));
                }
            }
        }
    }

    #[test]
    fn larger_k_needs_fewer_trie_bits() {
        let sigma = 1u64 << 16;
        let members = random_set(256, sigma, 4);
        let k1 = PredIndex::build(&members, sigma, 1).unwrap();
        let k4 = PredIndex::build(&members, sigma, 4).unwrap();
        assert!(k4.trie_bits() < k1.trie_bits());
        let m512 = PredIndex::build(&random_set(512, sigma, 5), sigma, 1).unwrap();
        let ratio = m512.bits() as f64 / k1.bits() as f64;
        assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PredIndex::build(&[1, 1], 8, 1).is_err());
        assert!(PredIndex::build(&[1], 8, 0).is_err());
        assert!(PredIndex::build(&[1], 8, 4).is_err()); // g = 3
        assert!(PredIndex::build(&[9], 8, 1).is_err());
    }

    #[test]
    fn trie_examples() {
        // keys 01, 10
        let t = BlindTrie::build(&[1, 2], 2, 2).unwrap();
        let keys = [1u64, 2];
        assert_eq!(t.predecessor(2, |r| Ok(keys[r])).unwrap(), Some(0));
        assert_eq!(t.predecessor(0, |r| Ok(keys[r])).unwrap(), None);
        assert_eq!(t.predecessor(1, |r| Ok(keys[r])).unwrap(), None);
        assert_eq!(t.predecessor(3, |r| Ok(keys[r])).unwrap(), Some(1));
        let t = BlindTrie::build(&[5], 3, 1).unwrap();
        assert_eq!(t.predecessor(7, |_| Ok(5)).unwrap(), Some(0));
        assert_eq!(t.node_count(), 1);
    }

    #[test]
    fn trie_node_sizes() {
        let t = BlindTrie::build(&[1, 2, 9, 12], 4, 3).unwrap();
        assert_eq!(t.node_count(), 7);
        // 7 shape bits, 3 inner x (2 + 3 + 3), 4 leaves x 3
        assert_eq!(t.bits(), 7 + 3 * 8 + 12);
    }

    proptest! {
        #[test]
        fn trie_matches_brute_force(
            set in proptest::collection::btree_set(0u64..1 << 12, 1..40),
            probes in proptest::collection::vec(0u64..1 << 12, 1..40),
        ) {
            let keys: Vec<u64> = set.into_iter().collect();
            let t = BlindTrie::build(&keys, 12, 6).unwrap();
            for p in probes.into_iter().chain(keys.iter().copied()) {
                let mut calls = 0;
                let got = t.predecessor(p, |r| { calls += 1; Ok(keys[r]) }).unwrap();
                let expect = keys.partition_point(|&x| x < p).checked_sub(1);
                prop_assert_eq!(got, expect);
                prop_assert!(calls <= 1);
            }
        }

        #[test]
        fn rank_matches_brute_force(
            set in proptest::collection::btree_set(0u64..1000, 0..120),
            k in 1usize..=10,
            probes in proptest::collection::vec(0u64..=1000, 1..60),
        ) {
            let members: Vec<u64> = set.into_iter().collect();
            let ix = PredIndex::build(&members, 1000, k).unwrap();
            for p in probes {
                let mut calls = 0;
                let r = ix.rank(p, |i| { calls += 1; Ok(members[i]) }).unwrap();
                prop_assert_eq!(r, members.partition_point(|&x| x < p));
                prop_assert!(calls <= s_call_budget(k));
            }
        }
    }
}
