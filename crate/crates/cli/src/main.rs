use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ssix::audit::{self, Query, Workload};
use ssix::index::StringIndex;
use ssix::text::{InputFormat, ProbedText};
use ssix::Error;

#[derive(Parser)]
#[command(version, about = "Rank/select index over a read-only text, with probe accounting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index file for a text.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "raw8")]
        format: InputFormat,
        /// Alphabet size; defaults to the largest symbol plus one.
        #[arg(long)]
        sigma: Option<u32>,
        /// Probe budget parameter.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        t: u32,
        /// Sampling rate of the in-block rank structure.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        k: u32,
        #[arg(long)]
        output: PathBuf,
    },
    /// Answer one query and report its probe count.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "raw8")]
        format: InputFormat,
        #[command(subcommand)]
        op: QueryOp,
    },
    /// Cross-check random and boundary queries against a linear scan.
    Verify {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "raw8")]
        format: InputFormat,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also check every hash and permutation inverse.
        #[arg(long)]
        components: bool,
    },
    /// Sweep (t, k) pairs and write sizes and probe maxima as CSV and JSON.
    Bench {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "raw8")]
        format: InputFormat,
        #[arg(long)]
        sigma: Option<u32>,
        #[arg(long, value_delimiter = ',', required = true,
              value_parser = clap::value_parser!(u32).range(1..))]
        t_list: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "1",
              value_parser = clap::value_parser!(u32).range(1..))]
        k_list: Vec<u32>,
        /// CSV destination; the JSON copy is written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
    },
}

#[derive(Subcommand, Clone, Copy)]
enum QueryOp {
    /// Occurrences of C in the first P symbols.
    Rank { c: u32, p: usize },
    /// Position of the J-th occurrence of C, or -1.
    Select { c: u32, j: usize },
    /// Symbol at position I.
    Access { i: usize },
}

impl From<QueryOp> for Query {
    fn from(op: QueryOp) -> Self {
        match op {
            QueryOp::Rank { c, p } => Query::Rank { c, p },
            QueryOp::Select { c, j } => Query::Select { c, j },
            QueryOp::Access { i } => Query::Access { i },
        }
    }
}

/// Failure that maps onto a process exit code.
enum Failure {
    Lib(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::PairingMismatch { .. } => 4,
        _ => 2,
    }
}

fn load_text(path: &Path, format: InputFormat, sigma: Option<u32>) -> Result<ProbedText, Error> {
    let file = File::open(path)?;
    ProbedText::load(BufReader::new(file), format, sigma)
}

fn load_index(path: &Path) -> Result<StringIndex, Error> {
    StringIndex::read_from(BufReader::new(File::open(path)?))
}

/// Loads the text with the alphabet recorded in the index.
fn load_pair(index: &Path, input: &Path, format: InputFormat) -> Result<(StringIndex, ProbedText), Error> {
    let ix = load_index(index)?;
    let text = load_text(input, format, Some(ix.sigma()))?;
    if text.fingerprint() != ix.fingerprint() {
        return Err(Error::PairingMismatch {
            expected: ix.fingerprint(),
            found: text.fingerprint(),
        });
    }
    Ok((ix, text))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Build { input, format, sigma, t, k, output } => {
            let text = load_text(&input, format, sigma)?;
            let ix = StringIndex::build(&text, t as usize, k as usize)?;
            let mut sink = BufWriter::new(File::create(&output)?);
            ix.write_to(&mut sink)?;
            sink.flush()?;
            let r = ix.space_report();
            writeln!(out, "n={} sigma={} t={} k={} blocks={}", ix.len(), ix.sigma(), t, k, ix.block_count())?;
            writeln!(out, "z_bits={}", r.z_bits)?;
            writeln!(out, "cross_bits={}", r.cross_bits)?;
            writeln!(out, "mmphf_bits={}", r.mmphf_bits)?;
            writeln!(out, "pred_bits={}", r.pred_bits)?;
            writeln!(out, "shortcut_bits={}", r.shortcut_bits)?;
            writeln!(out, "locator_bits={}", r.locator_bits)?;
            writeln!(out, "header_bits={}", r.header_bits)?;
            writeln!(out, "r_bits={}", r.total_bits)?;
            writeln!(out, "bits_per_symbol={:.4}", r.total_bits as f64 / ix.len() as f64)?;
        }
        Command::Query { index, input, format, op } => {
            let (ix, text) = load_pair(&index, &input, format)?;
            let (answer, probes) = audit::answer(&ix, &text, op.into())?;
            writeln!(out, "{answer} probes={probes}")?;
        }
        Command::Verify { index, input, format, queries, seed, components } => {
            let (ix, text) = load_pair(&index, &input, format)?;
            if components {
                let c = ix.check_components(&text)?;
                writeln!(
                    out,
                    "components ok: {} hash members, {} permutation points",
                    c.hash_members, c.perm_points
                )?;
            }
            let workload = Workload::new(seed, queries).queries(&text);
            let (mut mismatches, mut over_budget) = (0usize, 0usize);
            for &q in &workload {
                let (got, probes) = audit::answer(&ix, &text, q)?;
                let want = audit::oracle_answer(&text, q)?;
                if got != want {
                    mismatches += 1;
                    if mismatches <= 10 {
                        writeln!(out, "mismatch: {q} gave {got}, expected {want}")?;
                    }
                }
                let budget = audit::budget(q, ix.t(), ix.k());
                if probes > budget {
                    over_budget += 1;
                    if over_budget <= 10 {
                        writeln!(out, "over budget: {q} used {probes} probes, budget {budget}")?;
                    }
                }
            }
            writeln!(
                out,
                "checked {} queries: {mismatches} mismatches, {over_budget} over budget",
                workload.len()
            )?;
            if mismatches + over_budget > 0 {
                return Err(Failure::Check("verification failed".into()));
            }
        }
        Command::Bench { input, format, sigma, t_list, k_list, out: csv_path, seed, queries } => {
            let text = load_text(&input, format, sigma)?;
            let t_list: Vec<usize> = t_list.into_iter().map(|t| t as usize).collect();
            let k_list: Vec<usize> = k_list.into_iter().map(|k| k as usize).collect();
            let records = audit::sweep(&text, &t_list, &k_list, &Workload::new(seed, queries))?;
            let mut csv = BufWriter::new(File::create(&csv_path)?);
            audit::write_csv(&records, &mut csv)?;
            csv.flush()?;
            let mut json = BufWriter::new(File::create(csv_path.with_extension("json"))?);
            audit::write_json(&records, &mut json)?;
            json.flush()?;
            for r in &records {
                writeln!(
                    out,
                    "t={} k={} r_bits={} bits_per_symbol={:.4} select_max={} rank_max={}",
                    r.t,
                    r.k,
                    r.r_bits,
                    r.r_bits as f64 / r.n as f64,
                    r.select_probes_max,
                    r.rank_probes_max
                )?;
                eprintln!("t={} k={}: {:.0} ns/query", r.t, r.k, r.nanos_per_query);
            }
            let report = audit::check_budget(&records);
            for f in &report.failures {
                writeln!(out, "FAIL {f}")?;
            }
            writeln!(
                out,
                "budget {}: observed constant {:.3} (limit {} with {} additive bits)",
                if report.passed { "ok" } else { "failed" },
                report.observed_constant,
                report.constant,
                report.additive_bits
            )?;
            if !report.passed {
                return Err(Failure::Check("budget check failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("ssix: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("ssix: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
