//! Long-tailed ten-class Gaussian mixture: plain CE, logit adjustment, and
//! the bilevel search over (l, Delta) started from logit adjustment.
//!
//! cargo run --release --example autobalance_longtail -- [config.toml] [seed]

use std::path::PathBuf;
use std::time::Instant;

use lossforge::bilevel::Phase;
use lossforge::cli::{self, ExperimentConfig, Mode};

fn main() -> lossforge::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/longtail.toml"));
    let cfg = ExperimentConfig::load(&path)?;
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(cfg.seed);
    let counts = cli::generate(&cfg, seed)?.split.train.class_counts().to_vec();
    println!("training class sizes {counts:?}");

    for (name, mode) in [("ce", Mode::BaselineCe), ("la", Mode::BaselineLa), ("autobalance", Mode::Autobalance)] {
        let t = Instant::now();
        let out = cli::execute(&cfg, mode, &cfg.objective, seed)?;
        println!("{name:>12}: balanced test error {:.4} ({:.1?})", out.test.balanced_err, t.elapsed());
        if mode != Mode::Autobalance {
            continue;
        }
        let search: Vec<_> = out.log.phase(Phase::Search).collect();
        let min_train = search.iter().map(|r| r.train_err).fold(1.0, f64::min);
        let last = search.last().expect("search ran");
        println!("search: min train error {min_train}, final validation balanced error {:.4}", last.val_err.unwrap_or(f64::NAN));
        let e = out.alpha.expand();
        for (c, n) in counts.iter().enumerate() {
            println!("class {c}: n = {n:4}  l = {:+.4}  delta = {:.4}", e.l[c], e.delta[c]);
        }
    }
    Ok(())
}
