use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::svm::{cosine, solve_augmented_svm_2d, solve_cs_svm, BinaryData};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma2Report {
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub cosine: f64,
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub pass: bool,
}

/// Solve the cost-sensitive SVM, turn its margins into the augmentation
/// radii `eps = (1/delta - 1) / ||w||`, and compare directions with the
/// augmented SVM.
pub fn lemma2_check(data: &BinaryData, delta_plus: f64, delta_minus: f64) -> Result<Lemma2Report> {
    for d in [delta_plus, delta_minus] {
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1], got {d}")));
        }
    }
    let cs = solve_cs_svm(data, delta_plus, delta_minus)?;
    let eps_plus = (1.0 / delta_plus - 1.0) / cs.objective;
    let eps_minus = (1.0 / delta_minus - 1.0) / cs.objective;
    let aug = solve_augmented_svm_2d(data, eps_plus, eps_minus)?;
    let cosine = cosine(&cs.w, &aug.w);
    Ok(Lemma2Report {
        delta_plus,
        delta_minus,
        cosine,
        eps_plus,
        eps_minus,
        pass: cosine >= 1.0 - 1e-6,
    })
}

/// Two planar Gaussian clouds around `+mean` and `-mean`, keeping only points
/// on the correct side of the line through the origin orthogonal to `mean`
/// with margin at least `gap`, so the sample is homogeneously separable.
pub fn gaussian_pair(n_per_class: usize, mean: [f64; 2], std: f64, gap: f64, rng: &mut Rng) -> Result<BinaryData> {
    let noise = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
    let mn = (mean[0] * mean[0] + mean[1] * mean[1]).sqrt();
    if mn <= gap {
        return Err(Error::Config("mean too close to the origin for the requested gap".into()));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for label in [1.0, -1.0] {
        let mut kept = 0;
        while kept < n_per_class {
            let p = [label * mean[0] + noise.sample(rng), label * mean[1] + noise.sample(rng)];
            if label * (p[0] * mean[0] + p[1] * mean[1]) / mn >= gap {
                x.push(p.to_vec());
                y.push(label);
                kept += 1;
            }
        }
    }
    BinaryData::new(x, y)
}

/// Random mean direction in the open first quadrant scaled to `radius`.
pub fn random_mean(radius: f64, rng: &mut Rng) -> [f64; 2] {
    let phi: f64 = rng.random_range(0.1..1.4);
    [radius * phi.cos(), radius * phi.sin()]
}
