//! Long-tailed Gaussian mixtures and their stratified train/validation split.
//!
//! cargo run --release --example longtail_data -- [rho]

use lossforge::data::{self, MixtureSpec};

fn main() -> lossforge::Result<()> {
    let rho: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100.0);
    let mixture = MixtureSpec { dim: 16, spacing: 3.0, noise_std: 1.0 };
    let (full, profile) = data::make_longtail(&[1000; 10], rho, &mixture, 0)?;
    println!("rho = {rho}, mu = {:.6}", profile.mu);
    println!("class sizes {:?}", profile.sizes);
    let split = data::split(&full, 0.8, 0)?;
    println!("train {:?}", split.train.class_counts());
    println!("val   {:?}", split.val.class_counts());
    let priors: Vec<String> = split.train.class_priors().iter().map(|p| format!("{p:.4}")).collect();
    println!("train priors [{}]", priors.join(", "));
    let dir = std::env::temp_dir().join("lossforge-longtail");
    let meta = data::meta_for(&split.train, serde_json::to_value(&profile)?, 0);
    data::save(&split.train, &meta, &dir, "train")?;
    let (back, _) = data::load(&dir, "train")?;
    println!("round trip through {}: {}", dir.display(), back == split.train);
    Ok(())
}
