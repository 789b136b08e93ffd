//! Linear and MLP classifiers over a single flat parameter vector.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Linear,
    Mlp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    #[serde(default)]
    pub hidden_sizes: Vec<usize>,
    pub num_classes: usize,
}

impl ModelSpec {
    pub fn linear(input_dim: usize, num_classes: usize) -> Self {
        Self {
            kind: ModelKind::Linear,
            input_dim,
            hidden_sizes: vec![],
            num_classes,
        }
    }

    pub fn mlp(input_dim: usize, hidden_sizes: &[usize], num_classes: usize) -> Self {
        Self {
            kind: ModelKind::Mlp,
            input_dim,
            hidden_sizes: hidden_sizes.to_vec(),
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            ModelKind::Linear => self.hidden_sizes.is_empty(),
            ModelKind::Mlp => !self.hidden_sizes.is_empty(),
        };
        if !ok || self.input_dim == 0 || self.num_classes == 0 || self.hidden_sizes.contains(&0) {
            return Err(Error::Config(format!("invalid model spec {self:?}")));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of each affine layer.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden_sizes);
        dims.push(self.num_classes);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Length of the flat parameter vector: per layer, a row-major
    /// `fan_in x fan_out` weight followed by a `fan_out` bias.
    pub fn num_params(&self) -> usize {
        self.layers().iter().map(|(i, o)| i * o + o).sum()
    }

    /// He-normal weights, zero biases.
    pub fn init(&self, rng: &mut Rng) -> Tensor {
        let mut theta = Vec::with_capacity(self.num_params());
        for (fan_in, fan_out) in self.layers() {
            let std = (2.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                let z: f64 = StandardNormal.sample(rng);
                theta.push(std * z);
            }
            theta.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Tensor::vector(theta)
    }

    /// Logits `n x K` on the tape; `x` is `n x d`.
    pub fn forward<'t>(&self, theta: Var<'t>, x: Var<'t>) -> Var<'t> {
        let n = x.value().dims2().0;
        let layers = self.layers();
        let mut h = x;
        let mut off = 0;
        for (li, &(fan_in, fan_out)) in layers.iter().enumerate() {
            let w = theta.slice(off, fan_in * fan_out).reshape(&[fan_in, fan_out]);
            off += fan_in * fan_out;
            let b = theta.slice(off, fan_out).reshape(&[1, fan_out]).expand_rows(n);
            off += fan_out;
            h = h.matmul(w) + b;
            if li + 1 < layers.len() {
                h = h.relu();
            }
        }
        h
    }

    /// Tape-free logits for evaluation.
    pub fn logits(&self, theta: &Tensor, x: &Tensor) -> Tensor {
        let (n, _) = x.dims2();
        let layers = self.layers();
        let p = theta.data();
        let mut h = x.clone();
        let mut off = 0;
        for (li, &(fan_in, fan_out)) in layers.iter().enumerate() {
            let w = Tensor::matrix(fan_in, fan_out, p[off..off + fan_in * fan_out].to_vec());
            off += fan_in * fan_out;
            let b = &p[off..off + fan_out];
            off += fan_out;
            let mut z = h.matmul(&w);
            let last = li + 1 == layers.len();
            for i in 0..n {
                for (zj, bj) in z.data_mut()[i * fan_out..(i + 1) * fan_out].iter_mut().zip(b) {
                    *zj += bj;
                    if !last {
                        *zj = zj.max(0.0);
                    }
                }
            }
            h = z;
        }
        h
    }
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    let (n, k) = logits.dims2();
    (0..n)
        .map(|i| {
            let row = &logits.data()[i * k..(i + 1) * k];
            let mut best = 0;
            for j in 1..k {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::rng;

    #[test]
    fn param_count_and_forward_agree() {
        let spec = ModelSpec::mlp(3, &[5, 4], 2);
        assert_eq!(spec.num_params(), 3 * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);
        let theta = spec.init(&mut rng::stream(1, "init"));
        let x = Tensor::matrix(2, 3, vec![0.5, -1.0, 2.0, 0.0, 1.0, -0.3]);
        let tape = Tape::new();
        let out = spec.forward(tape.leaf(theta.clone()), tape.constant(x.clone()));
        let direct = spec.logits(&theta, &x);
        assert_eq!(out.shape(), vec![2, 2]);
        for (a, b) in out.value().data().iter().zip(direct.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_model_is_affine() {
        let spec = ModelSpec::linear(2, 2);
        let theta = Tensor::vector(vec![1.0, 2.0, 3.0, 4.0, 0.5, -0.5]);
        let x = Tensor::matrix(1, 2, vec![1.0, 1.0]);
        assert_eq!(spec.logits(&theta, &x).data(), &[4.5, 5.5]);
    }

    #[test]
    fn argmax_ties_lowest() {
        let l = Tensor::matrix(2, 3, vec![1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
        assert_eq!(argmax_rows(&l), vec![0, 1]);
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::mlp(2, &[], 2).validate().is_err());
        let mut bad = ModelSpec::linear(2, 2);
        bad.hidden_sizes = vec![3];
        assert!(bad.validate().is_err());
    }
}
