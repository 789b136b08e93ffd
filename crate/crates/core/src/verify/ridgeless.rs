use serde::{Deserialize, Serialize};

use super::svm::{cosine, solve_cs_svm, BinaryData, SvmSolution};
use crate::error::{Error, Result};

/// Binary parametric logistic loss
/// `w_y log(1 + e^{l_y} e^{-delta_y y f(x)})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryLoss {
    pub w_plus: f64,
    pub w_minus: f64,
    pub l_plus: f64,
    pub l_minus: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
}

impl BinaryLoss {
    pub fn symmetric() -> Self {
        Self {
            w_plus: 1.0,
            w_minus: 1.0,
            l_plus: 0.0,
            l_minus: 0.0,
            delta_plus: 1.0,
            delta_minus: 1.0,
        }
    }

    fn side(&self, y: f64) -> (f64, f64, f64) {
        if y > 0.0 {
            (self.w_plus, self.l_plus, self.delta_plus)
        } else {
            (self.w_minus, self.l_minus, self.delta_minus)
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.w_plus, self.w_minus, self.delta_plus, self.delta_minus];
        if all.iter().any(|&v| !(v > 0.0 && v.is_finite())) || !(self.l_plus.is_finite() && self.l_minus.is_finite()) {
            return Err(Error::Config(format!("invalid binary loss {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RidgelessTrace {
    /// `cos(theta_t, w_hat)` after each step.
    pub cosines: Vec<f64>,
    pub reference: SvmSolution,
}

impl RidgelessTrace {
    pub fn final_cosine(&self) -> f64 {
        self.cosines.last().copied().unwrap_or(f64::NAN)
    }

    /// Largest drop below the running maximum over the last half of the
    /// trajectory; zero for a monotone tail.
    pub fn tail_drop(&self) -> f64 {
        let tail = &self.cosines[self.cosines.len() / 2..];
        let mut best = f64::NEG_INFINITY;
        let mut drop = 0.0f64;
        for &c in tail {
            best = best.max(c);
            drop = drop.max(best - c);
        }
        drop
    }
}

fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Normalised gradient descent from the origin on the parametric loss with a
/// linear model, tracking the direction against the cost-sensitive SVM with
/// margins `1/delta_y`.
///
/// Per-example gradient weights are handled in log space so that large
/// margins late in training do not underflow.
pub fn ridgeless_direction(data: &BinaryData, loss: &BinaryLoss, epochs: usize, step: f64) -> Result<RidgelessTrace> {
    loss.validate()?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Config(format!("step must be positive, got {step}")));
    }
    let reference = solve_cs_svm(data, loss.delta_plus, loss.delta_minus)?;
    let d = data.dim();
    let mut theta = vec![0.0; d];
    let mut cosines = Vec::with_capacity(epochs);
    let mut logw = vec![0.0; data.len()];
    for _ in 0..epochs {
        for (i, lw) in logw.iter_mut().enumerate() {
            let (w, l, delta) = loss.side(data.y[i]);
            *lw = w.ln() + delta.ln() + log_sigmoid(l - delta * data.margin(i, &theta));
        }
        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut g = vec![0.0; d];
        for (i, lw) in logw.iter().enumerate() {
            let c = (lw - top).exp() * data.y[i];
            for (gj, xj) in g.iter_mut().zip(&data.x[i]) {
                *gj += c * xj;
            }
        }
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn == 0.0 {
            break;
        }
        for (t, gj) in theta.iter_mut().zip(&g) {
            *t += step * gj / gn;
        }
        cosines.push(cosine(&theta, &reference.w));
    }
    Ok(RidgelessTrace { cosines, reference })
}
