//! Prints per-component sizes for a random text across several `t`.
//!
//! Usage: `cargo run --release --example tradeoff [n] [sigma] [seed]`

use ssix::audit::{random_text, sweep, Workload};

fn main() -> ssix::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("numeric argument"));
    let n = args.next().unwrap_or(100_000) as usize;
    let sigma = args.next().unwrap_or(1024) as u32;
    let seed = args.next().unwrap_or(0);
    let text = random_text(n, sigma, seed)?;
    let records = sweep(&text, &[1, 2, 4, 8, 16], &[1], &Workload::new(seed, 2000))?;
    let lg = (sigma as f64).log2();
    println!("t      r/n    z/n  cross/n  mmphf/n  pred/n  short/n  loc/n   r/(n lg s)  sel  rank");
    for r in &records {
        let per = |b: u64| b as f64 / n as f64;
        println!(
            "{:<4} {:7.3} {:6.3} {:8.3} {:8.3} {:7.3} {:8.3} {:6.3} {:11.3} {:4} {:5}",
            r.t,
            per(r.r_bits),
            per(r.z_bits),
            per(r.cross_bits),
            per(r.mmphf_bits),
            per(r.pred_bits),
            per(r.shortcut_bits),
            per(r.locator_bits),
            r.r_bits as f64 / (n as f64 * lg),
            r.select_probes_max,
            r.rank_probes_max,
        );
    }
    Ok(())
}
