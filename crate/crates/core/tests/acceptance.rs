//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use ssix::audit::{self, random_text, Query, Workload};
use ssix::index::{rank_budget, select_budget, StringIndex};
use ssix::pred::{self, PredIndex};
use ssix::text::ProbedText;

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

/// Per-query probe accounting shared by the correctness criteria.
#[derive(Default)]
struct Budgets {
    access: u64,
    select: u64,
    rank: u64,
    violations: u64,
    first: Option<String>,
}

impl Budgets {
    fn record(&mut self, q: Query, probes: u64, t: usize, k: usize, context: &str) {
        let (limit, exact) = match q {
            Query::Access { .. } => {
                self.access += 1;
                (1, true)
            }
            Query::Rank { .. } => {
                self.rank += 1;
                (rank_budget(t, k), false)
            }
            Query::Select { .. } => {
                self.select += 1;
                (select_budget(t), false)
            }
        };
        if probes > limit || (exact && probes != limit) {
            self.violations += 1;
            self.first
                .get_or_insert_with(|| format!("{context}: `{q}` used {probes} probes, budget {limit}"));
        }
    }
}

fn pow(base: usize, exp: usize) -> usize {
    base.pow(exp as u32)
}

/// Every string with n <= 8 over alphabets 2, 3, 4, every query, every (t, k).
fn exhaustive(budgets: &mut Budgets) -> Outcome {
    let start = Instant::now();
    let (mut strings, mut indexes, mut queries, mut mismatches) = (0u64, 0u64, 0u64, 0u64);
    let mut first = None;
    for sigma in 2usize..=4 {
        let g = pred::top_rate(sigma as u64);
        // alphabets larger than the text are rejected, so n starts at sigma
        for n in sigma..=8 {
            for code in 0..pow(sigma, n) {
                let symbols: Vec<u32> = (0..n).map(|i| (code / pow(sigma, i) % sigma) as u32).collect();
                let text = ProbedText::from_symbols(symbols.clone(), Some(sigma as u32)).unwrap();
                strings += 1;
                let mut expected = Vec::new();
                for c in 0..sigma as u32 {
                    let mut count = 0;
                    for p in 0..=n {
                        expected.push((Query::Rank { c, p }, count as i64));
                        if p < n && symbols[p] == c {
                            count += 1;
                        }
                    }
                    let positions: Vec<usize> = (0..n).filter(|&i| symbols[i] == c).collect();
                    for j in 1..=n + 1 {
                        let want = positions.get(j - 1).map_or(-1, |&x| x as i64);
                        expected.push((Query::Select { c, j }, want));
                    }
                }
                for (i, &s) in symbols.iter().enumerate() {
                    expected.push((Query::Access { i }, s as i64));
                }
                for t in [1usize, 2, 4] {
                    for k in [1usize, 2] {
                        if k > g {
                            continue;
                        }
                        let ix = StringIndex::build(&text, t, k).unwrap();
                        indexes += 1;
                        for &(q, want) in &expected {
                            let (got, probes) = audit::answer(&ix, &text, q).unwrap();
                            queries += 1;
                            let ctx = format!("s={symbols:?} sigma={sigma} t={t} k={k}");
                            if got != want {
                                mismatches += 1;
                                first.get_or_insert_with(|| format!("{ctx}: `{q}` gave {got}, expected {want}"));
                            }
                            budgets.record(q, probes, t, k, &ctx);
                        }
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        id: 1,
        name: "exhaustive oracle equivalence",
        passed: mismatches == 0 && secs < 60.0,
        detail: format!(
            "{strings} strings, {indexes} indexes, {queries} queries, {mismatches} mismatches in {secs:.1}s (limit 60s){}",
            first.map_or(String::new(), |f| format!("; first: {f}"))
        ),
    }
}

struct RandomRun {
    mismatches: u64,
    queries: u64,
    first_mismatch: Option<String>,
    z_blocks: u64,
    z_bad: Option<String>,
    hash_members: u64,
    perm_points: u64,
    component_error: Option<String>,
    reloads: u64,
    reload_error: Option<String>,
    secs: f64,
}

/// Z strings: full blocks have sigma ones and sigma zeros, the last block
/// has one per position.
fn check_z(ix: &StringIndex) -> Result<u64, String> {
    let sigma = ix.sigma() as usize;
    for b in 0..ix.block_count() {
        let z = ix.block_z(b).map_err(|e| e.to_string())?;
        let ones = z.count_ones();
        let zeros = z.len() - ones;
        if zeros != sigma || ones != ix.block_len(b) || (b + 1 < ix.block_count() && ones != sigma) {
            return Err(format!(
                "n={} sigma={sigma} block {b}: {ones} ones, {zeros} zeros",
                ix.len()
            ));
        }
    }
    Ok(ix.block_count() as u64)
}

/// 100 random texts with n = 10 000, t in {1, 4, 16}; also feeds the Z,
/// component and reload criteria.
fn randomized(budgets: &mut Budgets) -> RandomRun {
    let start = Instant::now();
    let mut run = RandomRun {
        mismatches: 0,
        queries: 0,
        first_mismatch: None,
        z_blocks: 0,
        z_bad: None,
        hash_members: 0,
        perm_points: 0,
        component_error: None,
        reloads: 0,
        reload_error: None,
        secs: 0.0,
    };
    let sigmas = [4u32, 64, 256, 1024];
    for i in 0..100u64 {
        let sigma = sigmas[i as usize % sigmas.len()];
        let text = random_text(10_000, sigma, 1000 + i).unwrap();
        let queries = Workload::new(i, 1000).queries(&text);
        let expected: Vec<i64> = queries
            .iter()
            .map(|&q| audit::oracle_answer(&text, q).unwrap())
            .collect();
        for t in [1usize, 4, 16] {
            let k = 1;
            let ctx = format!("text {i} sigma={sigma} t={t}");
            let ix = StringIndex::build(&text, t, k).unwrap();
            let mut answers = Vec::with_capacity(queries.len());
            for (&q, &want) in queries.iter().zip(&expected) {
                let (got, probes) = audit::answer(&ix, &text, q).unwrap();
                run.queries += 1;
                if got != want {
                    run.mismatches += 1;
                    run.first_mismatch
                        .get_or_insert_with(|| format!("{ctx}: `{q}` gave {got}, expected {want}"));
                }
                budgets.record(q, probes, t, k, &ctx);
                answers.push((got, probes));
            }

            match check_z(&ix) {
                Ok(blocks) => run.z_blocks += blocks,
                Err(e) => {
                    run.z_bad.get_or_insert(e);
                }
            }
            match ix.check_components(&text) {
                Ok(c) => {
                    run.hash_members += c.hash_members as u64;
                    run.perm_points += c.perm_points as u64;
                }
                Err(e) => {
                    run.component_error.get_or_insert(format!("{ctx}: {e}"));
                }
            }

            let bytes = ix.to_bytes();
            let reloaded = match StringIndex::from_bytes(&bytes) {
                Ok(r) => r,
                Err(e) => {
                    run.reload_error.get_or_insert(format!("{ctx}: {e}"));
                    continue;
                }
            };
            if reloaded.to_bytes() != bytes {
                run.reload_error.get_or_insert(format!("{ctx}: re-serialization differs"));
            }
            for (&q, &before) in queries.iter().zip(&answers) {
                let after = audit::answer(&reloaded, &text, q).unwrap();
                if after != before {
                    run.reload_error.get_or_insert(format!(
                        "{ctx}: `{q}` gave {before:?} before reload, {after:?} after"
                    ));
                }
            }
            run.reloads += 1;
        }
    }
    run.secs = start.elapsed().as_secs_f64();
    run
}

/// Shortcut bits halve per doubling of t, r shrinks with t, and r stays
/// below the text size for t >= 2.
fn tradeoff(budgets: &mut Budgets) -> (Outcome, Option<String>) {
    let n = 100_000;
    let sigma = 1024u32;
    let text = random_text(n, sigma, 77).unwrap();
    let queries = Workload::new(77, 1000).queries(&text);
    let text_bits = n as f64 * (sigma as f64).log2();
    let ts = [1usize, 2, 4, 8, 16];
    let mut records = Vec::new();
    let mut z_problem = None;
    for &t in &ts {
        let ix = StringIndex::build(&text, t, 1).unwrap();
        if let Err(e) = check_z(&ix) {
            z_problem.get_or_insert(e);
        }
        let rec = audit::measure(&ix, &text, &queries, 77).unwrap();
        for &q in &queries {
            let (_, probes) = audit::answer(&ix, &text, q).unwrap();
            budgets.record(q, probes, t, 1, &format!("tradeoff t={t}"));
        }
        records.push(rec);
    }
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for w in records.windows(2) {
        let ratio = w[1].shortcut_bits as f64 / w[0].shortcut_bits as f64;
        lines.push(format!("shortcut t={}->{}: x{ratio:.3}", w[0].t, w[1].t));
        if !(0.4..=0.6).contains(&ratio) {
            failures.push(format!(
                "shortcut bits t={} -> t={} changed by x{ratio:.3}, outside [0.4, 0.6]",
                w[0].t, w[1].t
            ));
        }
        if w[1].r_bits > w[0].r_bits {
            failures.push(format!("r grew from t={} to t={}", w[0].t, w[1].t));
        }
        if w[1].mismatches + w[0].mismatches > 0 {
            failures.push("oracle mismatches in trade-off workload".into());
        }
    }
    for r in &records {
        let frac = r.r_bits as f64 / text_bits;
        lines.push(format!("t={}: r={} bits = {frac:.3} n log2 sigma", r.t, r.r_bits));
        if r.t >= 2 && frac >= 1.0 {
            failures.push(format!(
                "t={}: r = {} bits is not below n log2 sigma = {text_bits:.0} ({frac:.3}x)",
                r.t, r.r_bits
            ));
        }
    }
    let report = audit::check_budget(&records);
    lines.push(format!(
        "budget check {} with observed constant {:.3}",
        if report.passed { "ok" } else { "failed" },
        report.observed_constant
    ));
    if !report.passed {
        failures.extend(report.failures);
    }
    let passed = failures.is_empty();
    let detail = if passed {
        lines.join("; ")
    } else {
        format!("{}; measured: {}", failures.join("; "), lines.join("; "))
    };
    (
        Outcome {
            id: 4,
            name: "trade-off shape",
            passed,
            detail,
        },
        z_problem,
    )
}

/// Brute-force check of the in-block rank structure over every subset.
fn pred_exhaustive() -> Result<u64, String> {
    let mut checks = 0;
    for sigma in 2u64..=10 {
        for mask in 0u32..1 << sigma {
            let members: Vec<u64> = (0..sigma).filter(|&x| mask >> x & 1 == 1).collect();
            for k in 1..=pred::top_rate(sigma) {
                let ix = PredIndex::build(&members, sigma, k).map_err(|e| e.to_string())?;
                for p in 0..=sigma {
                    let mut calls = 0;
                    let got = ix
                        .rank(p, |i| {
                            calls += 1;
                            Ok(members[i])
                        })
                        .map_err(|e| e.to_string())?;
                    let want = members.iter().filter(|&&x| x < p).count();
                    if got != want || calls > pred::s_call_budget(k) {
                        return Err(format!(
                            "T={members:?} sigma={sigma} k={k} p={p}: {got} with {calls} calls, expected {want}"
                        ));
                    }
                    checks += 1;
                }
            }
        }
    }
    Ok(checks)
}

fn determinism() -> Result<String, String> {
    let mut files = 0;
    for (sigma, seed, t, k) in [(64u32, 5u64, 4usize, 2usize), (1024, 6, 16, 1), (4, 7, 1, 1)] {
        let a = StringIndex::build(&random_text(10_000, sigma, seed).unwrap(), t, k).unwrap();
        let b = StringIndex::build(&random_text(10_000, sigma, seed).unwrap(), t, k).unwrap();
        if a.to_bytes() != b.to_bytes() {
            return Err(format!("index bytes differ for sigma={sigma} t={t} k={k}"));
        }
        files += 1;
    }
    let text = random_text(10_000, 256, 8).unwrap();
    let bench = || {
        let recs = audit::sweep(&text, &[1, 4, 16], &[1, 2], &Workload::new(42, 500)).unwrap();
        let mut csv = Vec::new();
        audit::write_csv(&recs, &mut csv).unwrap();
        let mut json = Vec::new();
        audit::write_json(&recs, &mut json).unwrap();
        (csv, json)
    };
    let (csv_a, json_a) = bench();
    let (csv_b, json_b) = bench();
    if csv_a != csv_b || json_a != json_b {
        return Err("bench output differs between runs with the same seed".into());
    }
    Ok(format!(
        "{files} index files and a {}-byte CSV reproduced byte for byte",
        csv_a.len()
    ))
}

fn main() -> ExitCode {
    let mut budgets = Budgets::default();
    let mut outcomes = Vec::new();

    outcomes.push(exhaustive(&mut budgets));

    let run = randomized(&mut budgets);
    outcomes.push(Outcome {
        id: 2,
        name: "randomized oracle equivalence",
        passed: run.mismatches == 0,
        detail: format!(
            "{} queries over 100 texts x 3 values of t, {} mismatches in {:.1}s{}",
            run.queries,
            run.mismatches,
            run.secs,
            run.first_mismatch.as_ref().map_or(String::new(), |f| format!("; first: {f}"))
        ),
    });

    let (trade, trade_z) = tradeoff(&mut budgets);

    outcomes.push(Outcome {
        id: 3,
        name: "probe budgets",
        passed: budgets.violations == 0,
        detail: format!(
            "{} access, {} select, {} rank queries checked, {} over budget{}",
            budgets.access,
            budgets.select,
            budgets.rank,
            budgets.violations,
            budgets.first.as_ref().map_or(String::new(), |f| format!("; first: {f}"))
        ),
    });
    outcomes.push(trade);

    let z_error = run.z_bad.clone().or(trade_z);
    outcomes.push(Outcome {
        id: 5,
        name: "Z string shape",
        passed: z_error.is_none() && run.z_blocks > 0,
        detail: match &z_error {
            None => format!("{} blocks checked", run.z_blocks),
            Some(e) => e.clone(),
        },
    });

    let pred = pred_exhaustive();
    outcomes.push(Outcome {
        id: 6,
        name: "component correctness",
        passed: run.component_error.is_none() && pred.is_ok(),
        detail: format!(
            "{} hash members and {} permutation inverses checked; rank structure: {}{}",
            run.hash_members,
            run.perm_points,
            match &pred {
                Ok(n) => format!("{n} exhaustive queries ok"),
                Err(e) => e.clone(),
            },
            run.component_error.as_ref().map_or(String::new(), |e| format!("; {e}"))
        ),
    });

    outcomes.push(Outcome {
        id: 7,
        name: "serialization round trip",
        passed: run.reload_error.is_none() && run.reloads == 300,
        detail: match &run.reload_error {
            None => format!("{} indexes reloaded with identical bytes, answers and probe counts", run.reloads),
            Some(e) => e.clone(),
        },
    });

    let det = determinism();
    outcomes.push(Outcome {
        id: 8,
        name: "determinism",
        passed: det.is_ok(),
        detail: det.unwrap_or_else(|e| e),
    });

    outcomes.sort_by_key(|o| o.id);
    let mut all = true;
    for o in &outcomes {
        all &= o.passed;
        println!(
            "criterion {} ({}): {} {}",
            o.id,
            o.name,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
