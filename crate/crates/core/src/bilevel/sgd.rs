use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

/// Momentum buffer; starts at zero.
#[derive(Clone, Debug, Default)]
pub struct SgdState {
    velocity: Option<Tensor>,
}

impl SgdState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn velocity(&self) -> Option<&Tensor> {
        self.velocity.as_ref()
    }
}

/// `v <- momentum * v + grad + weight_decay * theta`, `theta <- theta - eta * v`.
pub fn sgd_step(
    theta: &mut Tensor,
    grad: &Tensor,
    state: &mut SgdState,
    eta: f64,
    momentum: f64,
    weight_decay: f64,
) {
    assert_eq!(theta.shape(), grad.shape(), "sgd_step shape mismatch");
    let v = state
        .velocity
        .get_or_insert_with(|| Tensor::zeros(theta.shape()));
    for ((vi, &gi), ti) in v.data_mut().iter_mut().zip(grad.data()).zip(theta.data_mut()) {
        *vi = momentum * *vi + gi + weight_decay * *ti;
        *ti -= eta * *vi;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    Constant,
    /// `x0.1` at 73% and again at 87% of the iterations.
    Step,
    Cosine,
}

impl LrSchedule {
    pub fn lr(&self, base: f64, it: usize, total: usize) -> f64 {
        let frac = if total == 0 { 0.0 } else { it as f64 / total as f64 };
        match self {
            Self::Constant => base,
            Self::Step => {
                if frac >= 0.87 {
                    base * 0.01
                } else if frac >= 0.73 {
                    base * 0.1
                } else {
                    base
                }
            }
            Self::Cosine => 0.5 * base * (1.0 + (std::f64::consts::PI * frac).cos()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_sgd() {
        let mut th = Tensor::vector(vec![1.0, -2.0]);
        let mut st = SgdState::new();
        sgd_step(&mut th, &Tensor::vector(vec![0.5, 1.0]), &mut st, 0.1, 0.0, 0.0);
        assert_eq!(th.data(), &[0.95, -2.1]);
        let before = th.clone();
        let mut st = SgdState::new();
        sgd_step(&mut th, &Tensor::zeros(&[2]), &mut st, 0.1, 0.9, 0.0);
        assert_eq!(th, before);
    }

    #[test]
    fn quadratic_bowl_contracts() {
        let mut th = Tensor::vector(vec![3.0, -1.0]);
        let mut st = SgdState::new();
        for step in 1..=10 {
            let g = th.clone();
            sgd_step(&mut th, &g, &mut st, 0.1, 0.0, 0.0);
            let want = 0.9f64.powi(step);
            assert!((th[0] - 3.0 * want).abs() < 1e-14);
            assert!((th[1] + want).abs() < 1e-14);
        }
    }

    #[test]
    fn momentum_accumulates() {
        let mut th = Tensor::vector(vec![0.0]);
        let mut st = SgdState::new();
        let g = Tensor::vector(vec![1.0]);
        sgd_step(&mut th, &g, &mut st, 1.0, 0.5, 0.0);
        sgd_step(&mut th, &g, &mut st, 1.0, 0.5, 0.0);
        assert_eq!(th[0], -(1.0 + 1.5));
    }

    #[test]
    fn step_schedule() {
        let s = LrSchedule::Step;
        assert_eq!(s.lr(1.0, 0, 100), 1.0);
        assert_eq!(s.lr(1.0, 73, 100), 0.1);
        assert!((s.lr(1.0, 87, 100) - 0.01).abs() < 1e-18);
    }
}
