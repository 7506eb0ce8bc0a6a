//! Probe and space measurements over parameter grids.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{rank_budget, select_budget, StringIndex};
use crate::oracle;
use crate::text::{ProbeSession, ProbedText};

/// Constant used by [`check_budget`] for the redundancy bound.
pub const SPACE_CONSTANT: f64 = 8.0;

/// Fixed per-file allowance (header, section table, stream lengths and word
/// padding) added to the redundancy bound so tiny texts are not judged on
/// constant overhead.
pub const SPACE_ADDITIVE_BITS: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Query {
    Access { i: usize },
    Rank { c: u32, p: usize },
    Select { c: u32, j: usize },
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Query::Access { i } => write!(f, "access {i}"),
            Query::Rank { c, p } => write!(f, "rank {c} {p}"),
            Query::Select { c, j } => write!(f, "select {c} {j}"),
        }
    }
}

/// Random queries plus boundary cases, fixed by a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Workload {
    pub seed: u64,
    /// Number of uniform random queries; 0 means no queries at all.
    pub random: usize,
}

impl Workload {
    pub fn new(seed: u64, random: usize) -> Self {
        Self { seed, random }
    }

    /// Materializes the queries for `text`.
    ///
    /// Random queries alternate between rank `(c, p)` and select `(c, j)`
    /// with `j` up to one past the count of `c`. Boundary queries cover every
    /// block start, `p ∈ {0, n}`, first and last occurrences, one-past-last
    /// occurrences and characters absent from the text.
    pub fn queries(&self, text: &ProbedText) -> Vec<Query> {
        if self.random == 0 {
            return Vec::new();
        }
        let n = text.len();
        let sigma = text.sigma();
        let symbols = text.symbols();
        let mut counts = vec![0usize; sigma as usize];
        for &s in symbols {
            counts[s as usize] += 1;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::new();
        for q in 0..self.random {
            let c = rng.gen_range(0..sigma);
            if q % 2 == 0 {
                out.push(Query::Rank { c, p: rng.gen_range(0..=n) });
            } else {
                out.push(Query::Select { c, j: rng.gen_range(1..=counts[c as usize] + 1) });
            }
        }

        // occurrences of each character before the current block start
        let mut seen = vec![0usize; sigma as usize];
        let mut p = 0;
        while p <= n {
            if p > 0 {
                out.push(Query::Rank { c: symbols[p - 1], p });
            }
            if p < n {
                let c = symbols[p];
                out.push(Query::Access { i: p });
                out.push(Query::Rank { c, p });
                out.push(Query::Rank { c, p: p + 1 });
                // first occurrence of c at or after the block start
                out.push(Query::Select { c, j: seen[c as usize] + 1 });
            }
            if p == n {
                break;
            }
            let next = (p + sigma as usize).min(n);
            for &s in &symbols[p..next] {
                seen[s as usize] += 1;
            }
            p = next;
        }
        for c in [0, sigma - 1] {
            out.push(Query::Rank { c, p: 0 });
            out.push(Query::Rank { c, p: n });
        }
        let mut absent = 0;
        for c in 0..sigma {
            let m = counts[c as usize];
            if m == 0 {
                if absent < 16 {
                    out.push(Query::Select { c, j: 1 });
                    out.push(Query::Rank { c, p: n });
                    out.push(Query::Rank { c, p: n / 2 });
                }
                absent += 1;
            } else if c < 16 {
                out.push(Query::Select { c, j: 1 });
                out.push(Query::Select { c, j: m });
                out.push(Query::Select { c, j: m + 1 });
            }
        }
        out.push(Query::Access { i: n - 1 });
        out
    }
}

/// Answer as printed by the command-line tool: `-1` for a missing occurrence.
pub fn answer(ix: &StringIndex, text: &ProbedText, q: Query) -> Result<(i64, u64)> {
    let mut session = ProbeSession::new();
    let a = match q {
        Query::Access { i } => ix.access(text, &mut session, i)? as i64,
        Query::Rank { c, p } => ix.rank(text, &mut session, c, p)? as i64,
        Query::Select { c, j } => ix.select(text, &mut session, c, j)?.map_or(-1, |x| x as i64),
    };
    Ok((a, session.count()))
}

pub fn oracle_answer(text: &ProbedText, q: Query) -> Result<i64> {
    Ok(match q {
        Query::Access { i } => *text.symbols().get(i).ok_or(Error::OutOfRange {
            index: i,
            len: text.len(),
        })? as i64,
        Query::Rank { c, p } => oracle::rank(text, c, p)? as i64,
        Query::Select { c, j } => oracle::select(text, c, j)?.map_or(-1, |x| x as i64),
    })
}

/// The probe budget that applies to `q`.
pub fn budget(q: Query, t: usize, k: usize) -> u64 {
    match q {
        Query::Access { .. } => 1,
        Query::Rank { .. } => rank_budget(t, k),
        Query::Select { .. } => select_budget(t),
    }
}

/// Measurements for one `(t, k)` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub n: usize,
    pub sigma: u32,
    pub t: usize,
    pub k: usize,
    pub seed: u64,
    pub r_bits: u64,
    pub z_bits: u64,
    pub cross_bits: u64,
    pub mmphf_bits: u64,
    pub pred_bits: u64,
    pub shortcut_bits: u64,
    pub locator_bits: u64,
    pub header_bits: u64,
    pub rank_queries: usize,
    pub rank_probes_max: u64,
    pub rank_probes_mean: f64,
    pub select_queries: usize,
    pub select_probes_max: u64,
    pub select_probes_mean: f64,
    pub access_queries: usize,
    pub access_probes_min: u64,
    pub access_probes_max: u64,
    /// Queries whose answer differed from the oracle.
    pub mismatches: usize,
    pub worst_rank: Option<Query>,
    pub worst_select: Option<Query>,
    /// Informational only; never written to CSV or JSON.
    pub nanos_per_query: f64,
}

/// The row written to CSV and JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvRow {
    pub n: usize,
    pub sigma: u32,
    pub t: usize,
    pub k: usize,
    pub r_bits: u64,
    pub z_bits: u64,
    pub cross_bits: u64,
    pub mmphf_bits: u64,
    pub pred_bits: u64,
    pub shortcut_bits: u64,
    pub rank_probes_max: u64,
    pub select_probes_max: u64,
    pub seed: u64,
}

impl From<&BenchRecord> for CsvRow {
    fn from(r: &BenchRecord) -> Self {
        Self {
            n: r.n,
            sigma: r.sigma,
            t: r.t,
            k: r.k,
            r_bits: r.r_bits,
            z_bits: r.z_bits,
            cross_bits: r.cross_bits,
            mmphf_bits: r.mmphf_bits,
            pred_bits: r.pred_bits,
            shortcut_bits: r.shortcut_bits,
            rank_probes_max: r.rank_probes_max,
            select_probes_max: r.select_probes_max,
            seed: r.seed,
        }
    }
}

fn dedup(values: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(values.len());
    for &v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Runs `workload` against an index for `ix`'s text and summarizes it.
pub fn measure(ix: &StringIndex, text: &ProbedText, queries: &[Query], seed: u64) -> Result<BenchRecord> {
    let space = ix.space_report();
    let mut rec = BenchRecord {
        n: ix.len(),
        sigma: ix.sigma(),
        t: ix.t(),
        k: ix.k(),
        seed,
        r_bits: space.total_bits,
        z_bits: space.z_bits,
        cross_bits: space.cross_bits,
        mmphf_bits: space.mmphf_bits,
        pred_bits: space.pred_bits,
        shortcut_bits: space.shortcut_bits,
        locator_bits: space.locator_bits,
        header_bits: space.header_bits,
        rank_queries: 0,
        rank_probes_max: 0,
        rank_probes_mean: 0.0,
        select_queries: 0,
        select_probes_max: 0,
        select_probes_mean: 0.0,
        access_queries: 0,
        access_probes_min: 0,
        access_probes_max: 0,
        mismatches: 0,
        worst_rank: None,
        worst_select: None,
        nanos_per_query: 0.0,
    };
    let (mut rank_sum, mut select_sum) = (0u64, 0u64);
    let start = Instant::now();
    for &q in queries {
        let (got, probes) = answer(ix, text, q)?;
        if got != oracle_answer(text, q)? {
            rec.mismatches += 1;
        }
        match q {
            Query::Access { .. } => {
                rec.access_probes_min = if rec.access_queries == 0 {
                    probes
                } else {
                    rec.access_probes_min.min(probes)
                };
                rec.access_probes_max = rec.access_probes_max.max(probes);
                rec.access_queries += 1;
            }
            Query::Rank { .. } => {
                if rec.worst_rank.is_none() || probes > rec.rank_probes_max {
                    rec.rank_probes_max = probes;
                    rec.worst_rank = Some(q);
                }
                rank_sum += probes;
                rec.rank_queries += 1;
            }
            Query::Select { .. } => {
                if rec.worst_select.is_none() || probes > rec.select_probes_max {
                    rec.select_probes_max = probes;
                    rec.worst_select = Some(q);
                }
                select_sum += probes;
                rec.select_queries += 1;
            }
        }
    }
    if !queries.is_empty() {
        rec.nanos_per_query = start.elapsed().as_nanos() as f64 / queries.len() as f64;
    }
    if rec.rank_queries > 0 {
        rec.rank_probes_mean = rank_sum as f64 / rec.rank_queries as f64;
    }
    if rec.select_queries > 0 {
        rec.select_probes_mean = select_sum as f64 / rec.select_queries as f64;
    }
    Ok(rec)
}

/// One record per distinct `(t, k)`, in input order.
pub fn sweep(
    text: &ProbedText,
    t_list: &[usize],
    k_list: &[usize],
    workload: &Workload,
) -> Result<Vec<BenchRecord>> {
    if t_list.is_empty() || k_list.is_empty() {
        return Err(Error::InvalidParameter("empty t or k list".into()));
    }
    let queries = workload.queries(text);
    let mut out = Vec::new();
    for &t in &dedup(t_list) {
        for &k in &dedup(k_list) {
            let ix = StringIndex::build(text, t, k)?;
            out.push(measure(&ix, text, &queries, workload.seed)?);
        }
    }
    Ok(out)
}

/// Outcome of [`check_budget`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub passed: bool,
    /// Constant the redundancy bound was checked against.
    pub constant: f64,
    pub additive_bits: u64,
    /// Largest `(r - additive) / (n·log2 σ / t + n·max(1, log2 log2 σ))` seen.
    pub observed_constant: f64,
    pub failures: Vec<String>,
}

/// `n·log2 σ / t + n·max(1, log2 log2 σ)`.
pub fn redundancy_scale(n: usize, sigma: u32, t: usize) -> f64 {
    let lg = (sigma as f64).log2();
    let lglg = lg.log2().max(1.0);
    n as f64 * (lg / t as f64 + lglg)
}

/// Checks probe budgets, oracle agreement and the redundancy bound.
pub fn check_budget(records: &[BenchRecord]) -> BudgetReport {
    let mut failures = Vec::new();
    let mut observed: f64 = 0.0;
    for r in records {
        let at = format!("n={} sigma={} t={} k={}", r.n, r.sigma, r.t, r.k);
        let sb = select_budget(r.t);
        if r.select_probes_max > sb {
            failures.push(format!(
                "{at}: `{}` used {} probes, select budget is {sb}",
                r.worst_select.map_or("select".into(), |q| q.to_string()),
                r.select_probes_max
            ));
        }
        let rb = rank_budget(r.t, r.k);
        if r.rank_probes_max > rb {
            failures.push(format!(
                "{at}: `{}` used {} probes, rank budget is {rb}",
                r.worst_rank.map_or("rank".into(), |q| q.to_string()),
                r.rank_probes_max
            ));
        }
        if r.access_queries > 0 && (r.access_probes_min != 1 || r.access_probes_max != 1) {
            failures.push(format!(
                "{at}: access used between {} and {} probes, expected exactly 1",
                r.access_probes_min, r.access_probes_max
            ));
        }
        if r.mismatches > 0 {
            failures.push(format!("{at}: {} answers differ from the oracle", r.mismatches));
        }
        let ratio = r.r_bits.saturating_sub(SPACE_ADDITIVE_BITS) as f64
            / redundancy_scale(r.n, r.sigma, r.t);
        observed = observed.max(ratio);
        if ratio > SPACE_CONSTANT {
            failures.push(format!(
                "{at}: redundancy {} bits exceeds {SPACE_ADDITIVE_BITS} + {SPACE_CONSTANT} x scale ({ratio:.2} x)",
                r.r_bits
            ));
        }
    }
    BudgetReport {
        passed: failures.is_empty(),
        constant: SPACE_CONSTANT,
        additive_bits: SPACE_ADDITIVE_BITS,
        observed_constant: observed,
        failures,
    }
}

pub fn write_csv<W: Write>(records: &[BenchRecord], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in records {
        w.serialize(CsvRow::from(r))
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(records: &[BenchRecord], mut sink: W) -> Result<()> {
    let rows: Vec<CsvRow> = records.iter().map(CsvRow::from).collect();
    serde_json::to_writer_pretty(&mut sink, &rows).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(sink)?;
    Ok(())
}

/// Uniform random text of length `n` over `[0, sigma)`.
pub fn random_text(n: usize, sigma: u32, seed: u64) -> Result<ProbedText> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let symbols = (0..n).map(|_| rng.gen_range(0..sigma)).collect();
    ProbedText::from_symbols(symbols, Some(sigma))
}
