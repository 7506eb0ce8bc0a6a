use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SAMPLE: [u8; 6] = [1, 0, 2, 1, 0, 0];

fn ssix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssix"))
        .args(args)
        .output()
        .expect("run ssix")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: TempDir,
    text: PathBuf,
    index: PathBuf,
}

fn fixture(t: &str) -> Fixture {
    let dir = TempDir::new().unwrap();
    let text = dir.path().join("sample.bin");
    let index = dir.path().join("sample.ssix");
    std::fs::write(&text, SAMPLE).unwrap();
    let o = ssix(&["build", "--input", s(&text), "--t", t, "--output", s(&index)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("blocks=2"));
    Fixture { _dir: dir, text, index }
}

fn query(f: &Fixture, op: &[&str]) -> Output {
    let mut args = vec!["query", "--index", s(&f.index), "--input", s(&f.text)];
    args.extend_from_slice(op);
    ssix(&args)
}

#[test]
fn sample_queries() {
    for t in ["1", "2", "4"] {
        let f = fixture(t);
        let o = query(&f, &["select", "0", "2"]);
        assert_eq!(o.status.code(), Some(0));
        let line = stdout(&o);
        let (answer, probes) = line.trim().split_once(" probes=").unwrap();
        assert_eq!(answer, "4");
        let budget = 2 * t.parse::<u64>().unwrap() + 1;
        assert!(probes.parse::<u64>().unwrap() <= budget);

        assert_eq!(stdout(&query(&f, &["rank", "0", "0"])), "0 probes=0\n");
        assert_eq!(stdout(&query(&f, &["select", "2", "2"])), "-1 probes=0\n");
        assert_eq!(stdout(&query(&f, &["access", "4"])), "0 probes=1\n");
        assert_eq!(stdout(&query(&f, &["rank", "0", "6"])).split(' ').next(), Some("3"));
    }
}

#[test]
fn query_errors() {
    let f = fixture("1");
    assert_eq!(query(&f, &["rank", "3", "0"]).status.code(), Some(2));
    assert_eq!(query(&f, &["rank", "0", "7"]).status.code(), Some(2));
    assert_eq!(query(&f, &["access", "6"]).status.code(), Some(2));
    assert_eq!(query(&f, &["frobnicate", "1"]).status.code(), Some(2));

    let other = f.text.with_file_name("other.bin");
    std::fs::write(&other, [1, 0, 2, 1, 0, 1]).unwrap();
    let o = ssix(&["query", "--index", s(&f.index), "--input", s(&other), "rank", "0", "3"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn build_usage_errors() {
    let f = fixture("1");
    let out = f.text.with_file_name("x.ssix");
    let build = |extra: &[&str]| {
        let mut args = vec!["build", "--input", s(&f.text), "--output", s(&out)];
        args.extend_from_slice(extra);
        ssix(&args).status.code()
    };
    assert_eq!(build(&["--t", "0"]), Some(2));
    assert_eq!(build(&["--t", "1", "--k", "3"]), Some(2));
    assert_eq!(build(&["--t", "1", "--sigma", "2"]), Some(2));
    assert_eq!(build(&["--t", "1", "--format", "u32le"]), Some(2));
    let missing = f.text.with_file_name("missing.bin");
    let o = ssix(&["build", "--input", s(&missing), "--t", "1", "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn verify_and_corruption() {
    let f = fixture("2");
    let verify = |index: &Path, n: &str| {
        ssix(&["verify", "--index", s(index), "--input", s(&f.text), "--queries", n, "--components"])
    };
    let o = verify(&f.index, "1000");
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = verify(&f.index, "0");
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("checked 0 queries"));

    let bytes = std::fs::read(&f.index).unwrap();
    let bad = f.index.with_file_name("bad.ssix");
    for pos in [0, 4, 40, bytes.len() / 2, bytes.len() - 1] {
        let mut b = bytes.clone();
        b[pos] ^= 0x5a;
        std::fs::write(&bad, &b).unwrap();
        let code = verify(&bad, "10").status.code();
        assert!(code.is_some_and(|c| c != 0), "flip at {pos}");
    }
    std::fs::write(&bad, &bytes[..bytes.len() - 3]).unwrap();
    assert_eq!(verify(&bad, "10").status.code(), Some(2));
}

#[test]
fn tokens_and_u32_inputs_agree() {
    let dir = TempDir::new().unwrap();
    let tokens = dir.path().join("t.txt");
    let words = dir.path().join("t.u32");
    let symbols: Vec<u32> = (0..300u32).map(|i| (i * 37 + i / 7) % 40).collect();
    let text: Vec<String> = symbols.iter().map(|x| x.to_string()).collect();
    std::fs::write(&tokens, text.join(" ")).unwrap();
    std::fs::write(&words, symbols.iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<_>>()).unwrap();
    let a = dir.path().join("a.ssix");
    let b = dir.path().join("b.ssix");
    for (input, fmt, out) in [(&tokens, "tokens", &a), (&words, "u32le", &b)] {
        let o = ssix(&["build", "--input", s(input), "--format", fmt, "--t", "3", "--k", "2", "--output", s(out)]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let o = ssix(&["query", "--index", s(&a), "--input", s(&words), "--format", "u32le", "select", "5", "3"]);
    let expect = symbols.iter().enumerate().filter(|&(_, &x)| x == 5).nth(2).unwrap().0;
    assert!(stdout(&o).starts_with(&format!("{expect} probes=")));
}

#[test]
fn bench_writes_stable_csv_and_json() {
    let dir = TempDir::new().unwrap();
    let text = dir.path().join("r.bin");
    let bytes: Vec<u8> = (0..5000u32).map(|i| (i.wrapping_mul(2654435761) >> 24) as u8).collect();
    std::fs::write(&text, &bytes).unwrap();
    let csv = dir.path().join("out.csv");
    let run = || {
        ssix(&[
            "bench", "--input", s(&text), "--t-list", "1,2,2,4", "--k-list", "1,2",
            "--out", s(&csv), "--seed", "7", "--queries", "200",
        ])
    };
    let first = run();
    assert_eq!(first.status.code(), Some(0), "{}", stdout(&first));
    let csv_a = std::fs::read_to_string(&csv).unwrap();
    let json_a = std::fs::read_to_string(csv.with_extension("json")).unwrap();
    let second = run();
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(csv_a, std::fs::read_to_string(&csv).unwrap());
    assert_eq!(json_a, std::fs::read_to_string(csv.with_extension("json")).unwrap());

    let lines: Vec<&str> = csv_a.lines().collect();
    assert_eq!(
        lines[0],
        "n,sigma,t,k,r_bits,z_bits,cross_bits,mmphf_bits,pred_bits,shortcut_bits,rank_probes_max,select_probes_max,seed"
    );
    // t = 2 given twice: three distinct t values times two k values
    assert_eq!(lines.len(), 1 + 6);
    assert!(json_a.contains("\"shortcut_bits\""));

    let missing = dir.path().join("none.bin");
    let o = ssix(&["bench", "--input", s(&missing), "--t-list", "1", "--out", s(&csv)]);
    assert_eq!(o.status.code(), Some(3));
}
