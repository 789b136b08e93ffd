//! The parametric cross-entropy family: plain CE, logit adjustment, and
//! multiplicative scaling, plus a frequency-clustered dictionary.
//!
//! cargo run --release --example parametric_loss

use lossforge::losses::{parametric_ce, Dictionary, InitKind, LossParams};

fn main() -> lossforge::Result<()> {
    let logits = [2.0, 0.5, -1.0];
    let priors = [0.7, 0.2, 0.1];
    let ones = [1.0; 3];
    let la: Vec<f64> = priors.iter().map(|p: &f64| p.ln()).collect();
    let delta = [1.0, 0.8, 0.5];
    for y in 0..3 {
        println!(
            "y = {y}: ce {:.4}  la {:.4}  la+delta {:.4}",
            parametric_ce(y, &logits, &ones, &[0.0; 3], &ones),
            parametric_ce(y, &logits, &ones, &la, &ones),
            parametric_ce(y, &logits, &ones, &la, &delta),
        );
    }

    let counts = [500, 300, 180, 100, 60, 30];
    let dict = Dictionary::frequency_clusters(&counts, 3)?;
    let total: usize = counts.iter().sum();
    let pi: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let params = LossParams::init(InitKind::LaInit, &pi, dict, false)?;
    let e = params.expand();
    println!("alpha ({} entries) = {:?}", params.alpha().len(), params.alpha().data());
    for (k, n) in counts.iter().enumerate() {
        println!("class {k} (n = {n:3}): w {:.3}  l {:+.3}  delta {:.3}", e.w[k], e.l[k], e.delta[k]);
    }
    Ok(())
}
