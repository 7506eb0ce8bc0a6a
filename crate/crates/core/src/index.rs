//! The systematic rank/select index.
//!
//! The text is cut into blocks of `σ` positions (the last one may be shorter).
//! Per block, `Z = 1^{n_0} 0 1^{n_1} 0 …` holds the character multiplicities,
//! and per character the block positions `T_c` get a monotone hash and a
//! rank structure. Together with `Z` the hash evaluates the block's
//! stable-sort permutation `π(i) = C_{s[i]} + h_{s[i]}(i)` with one probe, and
//! cycle shortcuts invert it in `O(t)` probes. Counts across blocks come from
//! `V_c = 1^{m_{c,0}} 0 1^{m_{c,1}} 0 …`.
//!
//! All `Z` strings are stored back to back in one bitvector, as are all `V_c`,
//! so each one is a run of a single run sequence and is found with one
//! `select0`. Per-(block, character) payloads are concatenated in a single
//! record stream with a sampled pointer every [`RECORD_STRIDE`] records.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bitbuf::{bit_width, ceil_log2, serialized_bitbuf_bits, BitBuf, ByteReader, ByteWriter};
use crate::bits::RsBitvector;
use crate::error::{Error, Result};
use crate::perm::{self, Shortcuts};
use crate::mmphf;
use crate::pred;
use crate::sparse::SparseSet;
use crate::text::{fnv1a, ProbeSession, ProbedText, FNV_OFFSET};

pub const MAGIC: [u8; 4] = *b"SSIX";
pub const VERSION: u8 = 0x01;
/// Records between two stored record pointers.
pub const RECORD_STRIDE: usize = 64;

const TAG_CROSS: u32 = 1;
const TAG_ZSTR: u32 = 2;
const TAG_MARKS: u32 = 3;
const TAG_TARGETS: u32 = 4;
const TAG_RECORDS: u32 = 5;
const TAG_RECPTR: u32 = 6;
const TAG_CHECKSUM: u32 = 7;
const SECTION_TAGS: [u32; 7] = [
    TAG_CROSS,
    TAG_ZSTR,
    TAG_MARKS,
    TAG_TARGETS,
    TAG_RECORDS,
    TAG_RECPTR,
    TAG_CHECKSUM,
];
const FIXED_HEADER_BYTES: usize = 4 + 1 + 8 + 4 + 4 + 4 + 8 + 4;
const SECTION_ENTRY_BYTES: usize = 4 + 8 + 8;

/// Probe budget for one `select`.
pub fn select_budget(t: usize) -> u64 {
    2 * t as u64 + 1
}

/// Probe budget for one `rank`.
pub fn rank_budget(t: usize, k: usize) -> u64 {
    pred::s_call_budget(k) * select_budget(t)
}

/// Exact size of every component, in bits.
///
/// Bitvector components include their rank/select directories. Every other
/// byte of the serialized file is counted in exactly one component, so
/// `total_bits` equals the file size in bits plus the directories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceReport {
    pub z_bits: u64,
    pub cross_bits: u64,
    pub mmphf_bits: u64,
    pub pred_bits: u64,
    pub shortcut_bits: u64,
    /// Sampled record pointers.
    pub locator_bits: u64,
    /// File header, section table, checksum and stream framing.
    pub header_bits: u64,
    pub total_bits: u64,
}

/// Outcome of [`StringIndex::check_components`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ComponentCheck {
    /// Members whose hash value was checked against their rank.
    pub hash_members: usize,
    /// Block positions `i` checked for `π⁻¹(π(i)) = i`.
    pub perm_points: usize,
    /// Most probes spent by one inversion.
    pub max_invert_probes: u64,
}

/// A rank/select index over a [`ProbedText`] that never stores the text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StringIndex {
    n: usize,
    sigma: usize,
    t: usize,
    k: usize,
    fingerprint: u64,
    blocks: usize,
    cross: RsBitvector,
    z: RsBitvector,
    marks: MarkSet,
    targets: BitBuf,
    records: BitBuf,
    recptr: BitBuf,
    recptr_width: u32,
    // derived on construction and load
    full_marks: usize,
    mmphf_bits: u64,
    pred_bits: u64,
    fallbacks: usize,
}

/// Start of run `r` (0-based) in a sequence of `1^a 0` runs.
fn run_start(bv: &RsBitvector, r: usize) -> Result<usize> {
    if r == 0 {
        return Ok(0);
    }
    bv.select0(r)
        .map(|p| p + 1)
        .ok_or_else(|| Error::Corrupt(format!("run {r} missing")))
}

/// Ones preceding run `r`.
fn ones_before_run(bv: &RsBitvector, r: usize) -> Result<usize> {
    Ok(run_start(bv, r)? - r)
}

/// Length of the run of ones starting at `pos`.
fn run_length(bits: &BitBuf, pos: usize) -> Result<usize> {
    let mut p = pos;
    loop {
        let width = (bits.len() - p).min(64);
        if width == 0 {
            return Err(Error::Corrupt("unterminated run".into()));
        }
        let ones = (bits.get_bits(p, width as u32).trailing_ones() as usize).min(width);
        p += ones;
        if ones < width {
            return Ok(p - pos);
        }
    }
}

/// All run lengths of a run sequence, in order.
fn all_runs(bits: &BitBuf) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    let mut p = 0;
    while p < bits.len() {
        let m = run_length(bits, p)?;
        out.push(m as u32);
        p += m + 1;
    }
    Ok(out)
}

/// Shortcut lookups for one block.
struct BlockShortcuts<'a> {
    ix: &'a StringIndex,
    base: usize,
    len: usize,
}

impl Shortcuts for BlockShortcuts<'_> {
    fn spacing(&self) -> usize {
        self.ix.t
    }

    fn shortcut(&self, x: usize) -> Result<Option<usize>> {
        if x >= self.len {
            return Err(Error::Corrupt(format!("permutation value {x} outside block")));
        }
        let pos = self.base + x;
        match self.ix.marks.position(pos) {
            Some(i) => Ok(Some(self.ix.target(i)? as usize)),
            None => Ok(None),
        }
    }
}

impl StringIndex {
    /// Builds the index. Reads the whole text without charging probes.
    pub fn build(text: &ProbedText, t: usize, k: usize) -> Result<Self> {
        let n = text.len();
        let sigma = text.sigma() as usize;
        check_params(n, sigma, t, k)?;
        let symbols = text.symbols();
        let blocks = n.div_ceil(sigma);

        let mut z = BitBuf::new();
        let mut counts = vec![0u32; blocks * sigma];
        let mut marks = BitBuf::new();
        let mut targets = BitBuf::new();
        let mut records = BitBuf::new();
        let mut recptr = Vec::new();

        let mut prefix = vec![0usize; sigma + 1];
        let mut pi = Vec::with_capacity(sigma);
        let mut sorted = vec![0u64; sigma];
        for (b, block) in symbols.chunks(sigma).enumerate() {
            let cnt = &mut counts[b * sigma..(b + 1) * sigma];
            for &s in block {
                cnt[s as usize] += 1;
            }
            for c in 0..sigma {
                z.push_run(true, cnt[c] as usize);
                z.push(false);
                prefix[c + 1] = prefix[c] + cnt[c] as usize;
            }
            // stable sort: π(i) = C_{s[i]} + (occurrences of s[i] before i)
            let mut next = prefix.clone();
            pi.clear();
            for (i, &s) in block.iter().enumerate() {
                let slot = &mut next[s as usize];
                pi.push(*slot);
                sorted[*slot] = i as u64;
                *slot += 1;
            }
            let plan = perm::plan_marks(|x| pi[x], block.len(), t)?;
            let width = ceil_log2(block.len() as u64);
            for back in &plan {
                marks.push(back.is_some());
                if let Some(back) = back {
                    targets.push_bits(*back as u64, width);
                }
            }
            for c in 0..sigma {
                if (b * sigma + c) % RECORD_STRIDE == 0 {
                    recptr.push(records.len() as u64);
                }
                let keys = &sorted[prefix[c]..prefix[c + 1]];
                if !keys.is_empty() {
                    mmphf::encode(keys, sigma as u64, &mut records)?;
                    pred::encode(keys, sigma as u64, k, &mut records)?;
                }
            }
        }

        let mut cross = BitBuf::new();
        for c in 0..sigma {
            for b in 0..blocks {
                cross.push_run(true, counts[b * sigma + c] as usize);
                cross.push(false);
            }
        }
        let recptr_width = bit_width(records.len() as u64);
        let mut ptrs = BitBuf::new();
        for p in recptr {
            ptrs.push_bits(p, recptr_width);
        }
        Self::assemble(Parts {
            n,
            sigma,
            t,
            k,
            fingerprint: text.fingerprint(),
            cross: RsBitvector::new(cross),
            z: RsBitvector::new(z),
            marks: MarkSet::choose(marks)?,
            targets,
            records,
            recptr: ptrs,
            recptr_width,
        })
    }

    /// Validates the parts against each other and derives cached values.
    fn assemble(p: Parts) -> Result<Self> {
        check_params(p.n, p.sigma, p.t, p.k)
            .map_err(|e| Error::Corrupt(format!("header: {e}")))?;
        let (n, sigma) = (p.n, p.sigma);
        let blocks = n.div_ceil(sigma);
        let runs = blocks * sigma;
        let corrupt = |what: &str| Error::Corrupt(what.to_string());

        if p.z.len() != n + runs || p.z.count_zeros() != runs {
            return Err(corrupt("Z strings have the wrong shape"));
        }
        if p.cross.len() != n + runs || p.cross.count_zeros() != runs {
            return Err(corrupt("cross-block counts have the wrong shape"));
        }
        let counts = all_runs(p.z.bits())?;
        for (b, block) in counts.chunks(sigma).enumerate() {
            let len = block.iter().map(|&m| m as usize).sum::<usize>();
            if len != block_len(n, sigma, b) {
                return Err(corrupt("Z string disagrees with block length"));
            }
        }
        let cross_runs = all_runs(p.cross.bits())?;
        for c in 0..sigma {
            for b in 0..blocks {
                if cross_runs[c * blocks + b] != counts[b * sigma + c] {
                    return Err(corrupt("cross-block counts disagree with Z"));
                }
            }
        }

        if p.marks.len() != n {
            return Err(corrupt("mark vector has the wrong length"));
        }
        let full_marks = p.marks.rank((blocks - 1) * sigma);
        let full_width = ceil_log2(sigma as u64) as usize;
        let last_width = ceil_log2(block_len(n, sigma, blocks - 1) as u64) as usize;
        let expect = full_marks * full_width + (p.marks.count() - full_marks) * last_width;
        if p.targets.len() != expect {
            return Err(corrupt("shortcut targets have the wrong length"));
        }

        let nptr = runs.div_ceil(RECORD_STRIDE);
        if p.recptr_width != bit_width(p.records.len() as u64)
            || p.recptr.len() != nptr * p.recptr_width as usize
        {
            return Err(corrupt("record pointers have the wrong shape"));
        }

        let mut ix = Self {
            n,
            sigma,
            t: p.t,
            k: p.k,
            fingerprint: p.fingerprint,
            blocks,
            cross: p.cross,
            z: p.z,
            marks: p.marks,
            targets: p.targets,
            records: p.records,
            recptr: p.recptr,
            recptr_width: p.recptr_width,
            full_marks,
            mmphf_bits: 0,
            pred_bits: 0,
            fallbacks: 0,
        };

        for (i, pos) in ix.marks.positions().into_iter().enumerate() {
            if ix.target(i)? as usize >= block_len(n, sigma, pos / sigma) {
                return Err(corrupt("shortcut target outside its block"));
            }
        }

        let mut pos = 0;
        for (id, &m) in counts.iter().enumerate() {
            if id % RECORD_STRIDE == 0 && ix.record_pointer(id / RECORD_STRIDE) != pos {
                return Err(corrupt("record pointer mismatch"));
            }
            let (end, fb) = mmphf::audit_encoded(&ix.records, pos, m as usize, sigma as u64)?;
            let pred_len = if m > 0 {
                pred::encoded_bits(m as usize, sigma as u64, ix.k)
            } else {
                0
            };
            ix.mmphf_bits += (end - pos) as u64;
            ix.pred_bits += pred_len as u64;
            ix.fallbacks += fb;
            pos = end + pred_len;
            if pos > ix.records.len() {
                return Err(Error::Corrupt("record stream too short".into()));
            }
        }
        if pos != ix.records.len() {
            return Err(corrupt("record stream has trailing bits"));
        }
        Ok(ix)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn sigma(&self) -> u32 {
        self.sigma as u32
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn block_count(&self) -> usize {
        self.blocks
    }

    pub fn block_len(&self, b: usize) -> usize {
        block_len(self.n, self.sigma, b)
    }

    /// Buckets of per-character hashes that fell back to storing keys.
    pub fn fallback_buckets(&self) -> usize {
        self.fallbacks
    }

    /// Block `b`'s Z string.
    pub fn block_z(&self, b: usize) -> Result<BitBuf> {
        self.check_block(b)?;
        let start = run_start(&self.z, b * self.sigma)?;
        let len = self.block_len(b) + self.sigma;
        Ok((start..start + len).map(|p| self.z.bits().get(p)).collect())
    }

    /// Occurrences of `c` in every block, read from `V_c`.
    pub fn block_counts(&self, c: u32) -> Result<Vec<usize>> {
        self.check_symbol(c)?;
        let base = c as usize * self.blocks;
        (0..self.blocks)
            .map(|b| {
                let r = base + b;
                Ok(ones_before_run(&self.cross, r + 1)? - ones_before_run(&self.cross, r)?)
            })
            .collect()
    }

    /// `s[i]`, for exactly one probe.
    pub fn access(&self, text: &ProbedText, session: &mut ProbeSession, i: usize) -> Result<u32> {
        self.check_pairing(text)?;
        text.access(session, i)
    }

    /// Position of the `j`-th occurrence (1-based) of `c`, or `None` if `c`
    /// occurs fewer than `j` times.
    pub fn select(
        &self,
        text: &ProbedText,
        session: &mut ProbeSession,
        c: u32,
        j: usize,
    ) -> Result<Option<usize>> {
        self.check_pairing(text)?;
        self.check_symbol(c)?;
        if j == 0 {
            return Err(Error::InvalidParameter("occurrence numbers start at 1".into()));
        }
        let base = c as usize * self.blocks;
        let before = ones_before_run(&self.cross, base)?;
        let total = ones_before_run(&self.cross, base + self.blocks)? - before;
        if j > total {
            return Ok(None);
        }
        let pos = self
            .cross
            .select1(before + j)
            .ok_or_else(|| Error::Corrupt("cross-block count missing".into()))?;
        let b = self.cross.zeros_before(pos) - base;
        let in_block = before + j - ones_before_run(&self.cross, base + b)?;
        let (prefix, _) = self.span(b, c as usize)?;
        let x = self.invert(text, session, b, prefix + in_block - 1)?;
        Ok(Some(b * self.sigma + x))
    }

    /// Occurrences of `c` in `s[0, p)`.
    pub fn rank(
        &self,
        text: &ProbedText,
        session: &mut ProbeSession,
        c: u32,
        p: usize,
    ) -> Result<usize> {
        self.check_pairing(text)?;
        self.check_symbol(c)?;
        if p > self.n {
            return Err(Error::OutOfRange {
                index: p,
                len: self.n,
            });
        }
        let base = c as usize * self.blocks;
        let b = p / self.sigma;
        let before = ones_before_run(&self.cross, base)?;
        let cross = ones_before_run(&self.cross, base + b)? - before;
        let offset = p - b * self.sigma;
        if b == self.blocks || offset == 0 {
            return Ok(cross);
        }
        let (prefix, m) = self.span(b, c as usize)?;
        if m == 0 {
            return Ok(cross);
        }
        let start = self.record_start(b * self.sigma + c as usize)?;
        let (pred_start, _) = mmphf::skip_encoded(&self.records, start, m, self.sigma as u64)?;
        let in_block = pred::rank_encoded(
            &self.records,
            pred_start,
            m,
            self.sigma as u64,
            self.k,
            offset as u64,
            |i| Ok(self.invert(text, session, b, prefix + i)? as u64),
        )?;
        Ok(cross + in_block)
    }

    /// Verifies every per-character hash on its members and `π⁻¹ ∘ π = id`
    /// on every block position. Uses `text` freely; no probes are reported.
    pub fn check_components(&self, text: &ProbedText) -> Result<ComponentCheck> {
        self.check_pairing(text)?;
        let mut report = ComponentCheck::default();
        let symbols = text.symbols();
        for b in 0..self.blocks {
            let base = b * self.sigma;
            let block = &symbols[base..base + self.block_len(b)];
            for c in 0..self.sigma {
                let (_, m) = self.span(b, c)?;
                if m == 0 {
                    continue;
                }
                let start = self.record_start(base + c)?;
                let members = block.iter().enumerate().filter(|&(_, &s)| s as usize == c);
                for (rank, (x, _)) in members.enumerate() {
                    let h = mmphf::eval_encoded(&self.records, start, m, self.sigma as u64, x as u64)?;
                    if h != rank {
                        return Err(Error::Corrupt(format!(
                            "hash of block {b} character {c} maps member {x} to {h}, expected {rank}"
                        )));
                    }
                    report.hash_members += 1;
                }
            }
            let mut scratch = ProbeSession::new();
            for x in 0..block.len() {
                let q = self.pi(text, &mut scratch, b, x)?;
                let mut session = ProbeSession::new();
                let back = self.invert(text, &mut session, b, q)?;
                if back != x {
                    return Err(Error::Corrupt(format!(
                        "block {b}: inverse of π({x}) = {q} is {back}"
                    )));
                }
                report.max_invert_probes = report.max_invert_probes.max(session.count());
                report.perm_points += 1;
            }
        }
        Ok(report)
    }

    pub fn space_report(&self) -> SpaceReport {
        let z_bits = self.z.size_bits();
        let cross_bits = self.cross.size_bits();
        let shortcut_bits = self.marks.size_bits() + serialized_bitbuf_bits(&self.targets);
        let locator_bits = 8 + serialized_bitbuf_bits(&self.recptr);
        let framing = serialized_bitbuf_bits(&self.records) - self.records.len() as u64;
        let header_bits = 8 * (FIXED_HEADER_BYTES + SECTION_TAGS.len() * SECTION_ENTRY_BYTES + 8) as u64
            + framing;
        SpaceReport {
            z_bits,
            cross_bits,
            mmphf_bits: self.mmphf_bits,
            pred_bits: self.pred_bits,
            shortcut_bits,
            locator_bits,
            header_bits,
            total_bits: z_bits
                + cross_bits
                + self.mmphf_bits
                + self.pred_bits
                + shortcut_bits
                + locator_bits
                + header_bits,
        }
    }

    /// Rank/select directory bits, which are rebuilt on load rather than stored.
    pub fn directory_bits(&self) -> u64 {
        self.z.directory_bits() + self.cross.directory_bits() + self.marks.directory_bits()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut sections: Vec<(u32, Vec<u8>)> = Vec::with_capacity(SECTION_TAGS.len());
        let mut section = |tag, f: &dyn Fn(&mut ByteWriter)| {
            let mut w = ByteWriter::default();
            f(&mut w);
            sections.push((tag, w.bytes));
        };
        section(TAG_CROSS, &|w| self.cross.write(w));
        section(TAG_ZSTR, &|w| self.z.write(w));
        section(TAG_MARKS, &|w| self.marks.write(w));
        section(TAG_TARGETS, &|w| w.bitbuf(&self.targets));
        section(TAG_RECORDS, &|w| w.bitbuf(&self.records));
        section(TAG_RECPTR, &|w| {
            w.u8(self.recptr_width as u8);
            w.bitbuf(&self.recptr);
        });

        let mut w = ByteWriter::default();
        w.bytes.extend_from_slice(&MAGIC);
        w.u8(VERSION);
        w.u64(self.n as u64);
        w.u32(self.sigma as u32);
        w.u32(self.t as u32);
        w.u32(self.k as u32);
        w.u64(self.fingerprint);
        w.u32(SECTION_TAGS.len() as u32);
        let mut offset = (FIXED_HEADER_BYTES + SECTION_TAGS.len() * SECTION_ENTRY_BYTES) as u64;
        for (tag, body) in &sections {
            w.u32(*tag);
            w.u64(offset);
            w.u64(body.len() as u64);
            offset += body.len() as u64;
        }
        w.u32(TAG_CHECKSUM);
        w.u64(offset);
        w.u64(8);
        for (_, body) in &sections {
            w.bytes.extend_from_slice(body);
        }
        let sum = fnv1a(FNV_OFFSET, &w.bytes);
        w.u64(sum);
        w.bytes
    }

    pub fn write_to<W: Write>(&self, mut sink: W) -> Result<()> {
        sink.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let magic: [u8; 4] = r.take(4)?.try_into().expect("four bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        let n = r.u64()?;
        let sigma = r.u32()?;
        let t = r.u32()?;
        let k = r.u32()?;
        let fingerprint = r.u64()?;
        let count = r.u32()? as usize;
        if count != SECTION_TAGS.len() {
            return Err(Error::Corrupt(format!("expected {} sections, found {count}", SECTION_TAGS.len())));
        }
        let mut expected_offset = (FIXED_HEADER_BYTES + count * SECTION_ENTRY_BYTES) as u64;
        let mut bodies = Vec::with_capacity(count);
        let mut table = Vec::with_capacity(count);
        for &want in &SECTION_TAGS {
            let tag = r.u32()?;
            let offset = r.u64()?;
            let len = r.u64()?;
            if tag != want || offset != expected_offset {
                return Err(Error::Corrupt(format!("unexpected section table entry {tag}")));
            }
            expected_offset = offset.checked_add(len).ok_or(Error::Truncated)?;
            table.push((offset, len));
        }
        for &(offset, len) in &table {
            let end = offset.checked_add(len).ok_or(Error::Truncated)?;
            if end > bytes.len() as u64 {
                return Err(Error::Truncated);
            }
            bodies.push(&bytes[offset as usize..end as usize]);
        }
        let (sum_offset, sum_len) = table[count - 1];
        if sum_len != 8 || sum_offset + 8 != bytes.len() as u64 {
            return Err(Error::Corrupt("trailing bytes after checksum".into()));
        }
        let stored = u64::from_le_bytes(bodies[count - 1].try_into().expect("eight bytes"));
        if fnv1a(FNV_OFFSET, &bytes[..sum_offset as usize]) != stored {
            return Err(Error::Corrupt("checksum mismatch".into()));
        }

        fn parse<T>(body: &[u8], f: impl FnOnce(&mut ByteReader<'_>) -> Result<T>) -> Result<T> {
            let mut r = ByteReader::new(body);
            let v = f(&mut r)?;
            r.expect_end()?;
            Ok(v)
        }
        let cross = parse(bodies[0], RsBitvector::read)?;
        let z = parse(bodies[1], RsBitvector::read)?;
        let marks = parse(bodies[2], MarkSet::read)?;
        let targets = parse(bodies[3], |r| r.bitbuf())?;
        let records = parse(bodies[4], |r| r.bitbuf())?;
        let (recptr_width, recptr) = parse(bodies[5], |r| Ok((r.u8()? as u32, r.bitbuf()?)))?;
        let to_usize =
            |v: u64| usize::try_from(v).map_err(|_| Error::Corrupt("value exceeds address space".into()));
        Self::assemble(Parts {
            n: to_usize(n)?,
            sigma: sigma as usize,
            t: t as usize,
            k: k as usize,
            fingerprint,
            cross,
            z,
            marks,
            targets,
            records,
            recptr,
            recptr_width,
        })
    }

    pub fn read_from<R: Read>(mut source: R) -> Result<Self> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    fn check_pairing(&self, text: &ProbedText) -> Result<()> {
        if text.fingerprint() != self.fingerprint || text.len() != self.n {
            return Err(Error::PairingMismatch {
                expected: self.fingerprint,
                found: text.fingerprint(),
            });
        }
        Ok(())
    }

    fn check_symbol(&self, c: u32) -> Result<()> {
        if c as usize >= self.sigma {
            return Err(Error::BadSymbol {
                symbol: c as u64,
                sigma: self.sigma as u32,
            });
        }
        Ok(())
    }

    fn check_block(&self, b: usize) -> Result<()> {
        if b >= self.blocks {
            return Err(Error::OutOfRange {
                index: b,
                len: self.blocks,
            });
        }
        Ok(())
    }

    /// `(C_c, n_c)` for block `b`: members of smaller characters, and of `c`.
    fn span(&self, b: usize, c: usize) -> Result<(usize, usize)> {
        let r = b * self.sigma + c;
        let start = run_start(&self.z, r)?;
        let m = run_length(self.z.bits(), start)?;
        Ok((start - r - b * self.sigma, m))
    }

    fn record_pointer(&self, i: usize) -> usize {
        let w = self.recptr_width;
        self.recptr.get_bits(i * w as usize, w) as usize
    }

    /// Bit offset of record `id = b·σ + c`.
    fn record_start(&self, id: usize) -> Result<usize> {
        let first = id / RECORD_STRIDE * RECORD_STRIDE;
        let mut pos = self.record_pointer(id / RECORD_STRIDE);
        let mut zpos = run_start(&self.z, first)?;
        for _ in first..id {
            let m = run_length(self.z.bits(), zpos)?;
            zpos += m + 1;
            if m > 0 {
                let (end, _) = mmphf::skip_encoded(&self.records, pos, m, self.sigma as u64)?;
                pos = end + pred::encoded_bits(m, self.sigma as u64, self.k);
            }
        }
        Ok(pos)
    }

    /// Back-pointer of mark `i`.
    fn target(&self, i: usize) -> Result<u64> {
        let full = ceil_log2(self.sigma as u64) as usize;
        let (pos, width) = if i < self.full_marks {
            (i * full, full)
        } else {
            let last = ceil_log2(self.block_len(self.blocks - 1) as u64) as usize;
            (self.full_marks * full + (i - self.full_marks) * last, last)
        };
        self.targets.try_get_bits(pos, width as u32)
    }

    /// `π(x)` for block `b`, costing one probe.
    fn pi(&self, text: &ProbedText, session: &mut ProbeSession, b: usize, x: usize) -> Result<usize> {
        let base = b * self.sigma;
        let c = text.access(session, base + x)? as usize;
        let (prefix, m) = self.span(b, c)?;
        let start = self.record_start(base + c)?;
        let h = mmphf::eval_encoded(&self.records, start, m, self.sigma as u64, x as u64)?;
        let y = prefix + h;
        if m == 0 || y >= self.block_len(b) {
            return Err(Error::Corrupt(format!("π({x}) left block {b}")));
        }
        Ok(y)
    }

    /// `π⁻¹(q)` for block `b`.
    fn invert(&self, text: &ProbedText, session: &mut ProbeSession, b: usize, q: usize) -> Result<usize> {
        let view = BlockShortcuts {
            ix: self,
            base: b * self.sigma,
            len: self.block_len(b),
        };
        if q >= view.len {
            return Err(Error::Corrupt(format!("inverse of {q} requested in block {b}")));
        }
        perm::invert(&view, q, |x| self.pi(text, session, b, x))
    }
}

struct Parts {
    n: usize,
    sigma: usize,
    t: usize,
    k: usize,
    fingerprint: u64,
    cross: RsBitvector,
    z: RsBitvector,
    marks: MarkSet,
    targets: BitBuf,
    records: BitBuf,
    recptr: BitBuf,
    recptr_width: u32,
}

/// Marked block positions, stored as a plain bitvector or, when that is
/// smaller, as a sparse set.
#[derive(Debug, Clone, PartialEq, Eq)]
enum MarkSet {
    Plain(RsBitvector),
    Sparse(SparseSet),
}

impl MarkSet {
    fn choose(bits: BitBuf) -> Result<Self> {
        let members: Vec<usize> = bits.iter().enumerate().filter(|&(_, b)| b).map(|(i, _)| i).collect();
        let sparse = SparseSet::new(&members, bits.len())?;
        let plain = RsBitvector::new(bits);
        Ok(if sparse.size_bits() < plain.size_bits() {
            MarkSet::Sparse(sparse)
        } else {
            MarkSet::Plain(plain)
        })
    }

    fn len(&self) -> usize {
        match self {
            MarkSet::Plain(v) => v.len(),
            MarkSet::Sparse(s) => s.universe(),
        }
    }

    fn count(&self) -> usize {
        match self {
            MarkSet::Plain(v) => v.count_ones(),
            MarkSet::Sparse(s) => s.len(),
        }
    }

    /// Index of `pos` among the marks, if marked.
    fn position(&self, pos: usize) -> Option<usize> {
        match self {
            MarkSet::Plain(v) => v.get(pos)?.then(|| v.ones_before(pos)),
            MarkSet::Sparse(s) => s.position(pos),
        }
    }

    /// Marks before `pos`.
    fn rank(&self, pos: usize) -> usize {
        match self {
            MarkSet::Plain(v) => v.ones_before(pos),
            MarkSet::Sparse(s) => s.rank(pos),
        }
    }

    fn positions(&self) -> Vec<usize> {
        match self {
            MarkSet::Plain(v) => v.bits().iter().enumerate().filter(|&(_, b)| b).map(|(i, _)| i).collect(),
            MarkSet::Sparse(s) => s.iter().collect(),
        }
    }

    fn size_bits(&self) -> u64 {
        8 + match self {
            MarkSet::Plain(v) => v.size_bits(),
            MarkSet::Sparse(s) => s.size_bits(),
        }
    }

    fn directory_bits(&self) -> u64 {
        let bytes = {
            let mut w = ByteWriter::default();
            self.write(&mut w);
            w.bytes.len() as u64
        };
        self.size_bits() - 8 * bytes
    }

    fn write(&self, w: &mut ByteWriter) {
        match self {
            MarkSet::Plain(v) => {
                w.u8(0);
                v.write(w);
            }
            MarkSet::Sparse(s) => {
                w.u8(1);
                s.write(w);
            }
        }
    }

    fn read(r: &mut ByteReader<'_>) -> Result<Self> {
        match r.u8()? {
            0 => Ok(MarkSet::Plain(RsBitvector::read(r)?)),
            1 => Ok(MarkSet::Sparse(SparseSet::read(r)?)),
            other => Err(Error::Corrupt(format!("unknown mark encoding {other}"))),
        }
    }
}

fn block_len(n: usize, sigma: usize, b: usize) -> usize {
    (n - b * sigma).min(sigma)
}

fn check_params(n: usize, sigma: usize, t: usize, k: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyText);
    }
    if sigma < 2 || sigma > n || sigma > u32::MAX as usize {
        return Err(Error::InvalidParameter(format!("alphabet size {sigma} for length {n}")));
    }
    if t == 0 || t > u32::MAX as usize {
        return Err(Error::InvalidParameter(format!("t must be at least 1, got {t}")));
    }
    let g = pred::top_rate(sigma as u64);
    if k == 0 || k > g {
        return Err(Error::InvalidParameter(format!(
            "k must lie in [1, {g}] for sigma {sigma}, got {k}"
        )));
    }
    Ok(())
}
