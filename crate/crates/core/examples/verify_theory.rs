//! Runs every theory check and prints a one-line summary per check.
//!
//! cargo run --release --example verify_theory -- [seed]

use lossforge::verify;

fn main() -> lossforge::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let t = std::time::Instant::now();
    let v = verify::run_all(seed)?;
    for c in &v.checks {
        println!("{:<16} {}", c.name, if c.pass { "pass" } else { "FAIL" });
    }
    for (loss, trace) in verify::ridgeless_suite(seed)? {
        println!(
            "ridgeless delta=({}, {}): final cosine {:.6}, tail drop {:.2e}",
            loss.delta_plus,
            loss.delta_minus,
            trace.final_cosine(),
            trace.tail_drop()
        );
    }
    let seeds: Vec<u64> = (0..20).collect();
    for row in verify::theorem1_trend(&verify::TrendProblem::default(), &verify::TREND_SIZES, &seeds)? {
        println!("n_val {:>4}: median excess risk {:.5}", row.n_val, row.median);
    }
    let worst = verify::lemma2_suite(24, seed)?.iter().map(|r| r.cosine).fold(1.0, f64::min);
    println!("lemma2 worst cosine {worst:.12}  ({:.1?})", t.elapsed());
    Ok(())
}
