use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as Gauss};

use crate::error::{Error, Result};
use crate::rng;

/// Imbalanced binary problem on the line: `x | y ~ N(means[y], std^2)`,
/// classifiers `predict 1 iff x > t` for thresholds `t` in `thresholds`, and
/// the two objectives standard error and balanced error blended as
/// `(1 - lambda) * std + lambda * bal` for every `lambda` in `lambdas`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendProblem {
    pub priors: [f64; 2],
    pub means: [f64; 2],
    pub std: f64,
    pub thresholds: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl Default for TrendProblem {
    fn default() -> Self {
        Self {
            priors: [0.85, 0.15],
            means: [-1.0, 1.0],
            std: 1.0,
            thresholds: (0..=40).map(|i| -1.0 + 0.075 * i as f64).collect(),
            lambdas: (0..=4).map(|i| 0.25 * i as f64).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendRow {
    pub n_val: usize,
    /// Per seed, the worst excess risk over the lambda grid.
    pub excess: Vec<f64>,
    pub median: f64,
}

impl TrendProblem {
    fn validate(&self) -> Result<()> {
        let ok = self.priors.iter().all(|&p| p > 0.0)
            && (self.priors[0] + self.priors[1] - 1.0).abs() < 1e-12
            && self.std > 0.0
            && !self.thresholds.is_empty()
            && !self.lambdas.is_empty()
            && self.lambdas.iter().all(|l| (0.0..=1.0).contains(l));
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid trend problem {self:?}")))
        }
    }

    /// Population class-conditional errors `(P(x > t | 0), P(x <= t | 1))`.
    fn population_errors(&self, t: f64) -> [f64; 2] {
        let g = |m: f64| Gauss::new(m, self.std).expect("validated std").cdf(t);
        [1.0 - g(self.means[0]), g(self.means[1])]
    }

    fn blend(&self, lambda: f64, e: [f64; 2]) -> f64 {
        let std = self.priors[0] * e[0] + self.priors[1] * e[1];
        let bal = 0.5 * (e[0] + e[1]);
        (1.0 - lambda) * std + lambda * bal
    }

    /// Worst-over-lambda excess population risk of validation-selected
    /// thresholds, for `n_val` validation draws from stream `seed`.
    pub fn excess_risk(&self, n_val: usize, seed: u64) -> Result<f64> {
        self.validate()?;
        let mut rng = rng::stream(seed, &format!("validation/{n_val}"));
        let noise = Normal::new(0.0, self.std).map_err(|e| Error::Config(e.to_string()))?;
        let sample: Vec<(usize, f64)> = (0..n_val)
            .map(|_| {
                let y = usize::from(rng.random::<f64>() < self.priors[1]);
                (y, self.means[y] + noise.sample(&mut rng))
            })
            .collect();
        let pop: Vec<[f64; 2]> = self.thresholds.iter().map(|&t| self.population_errors(t)).collect();
        // Empirical means of the per-example losses 1[err] and 1[err] / (2 pi_y).
        let emp: Vec<(f64, f64)> = self
            .thresholds
            .iter()
            .map(|&t| {
                let (mut s, mut b) = (0.0, 0.0);
                for &(y, x) in &sample {
                    if (x > t) != (y == 1) {
                        s += 1.0;
                        b += 0.5 / self.priors[y];
                    }
                }
                let n = n_val.max(1) as f64;
                (s / n, b / n)
            })
            .collect();
        let mut worst = 0.0f64;
        for &lambda in &self.lambdas {
            let risk: Vec<f64> = pop.iter().map(|&e| self.blend(lambda, e)).collect();
            let best = risk.iter().cloned().fold(f64::INFINITY, f64::min);
            let chosen = argmin(emp.iter().map(|&(s, b)| (1.0 - lambda) * s + lambda * b));
            worst = worst.max(risk[chosen] - best);
        }
        Ok(worst)
    }
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, v) in values.enumerate() {
        if v < best.0 {
            best = (v, i);
        }
    }
    best.1
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Excess multi-objective risk against validation size, median over seeds.
pub fn theorem1_trend(problem: &TrendProblem, val_sizes: &[usize], seeds: &[u64]) -> Result<Vec<TrendRow>> {
    val_sizes
        .iter()
        .map(|&n_val| {
            let excess = seeds.iter().map(|&s| problem.excess_risk(n_val, s)).collect::<Result<Vec<_>>>()?;
            Ok(TrendRow {
                n_val,
                median: median(&excess),
                excess,
            })
        })
        .collect()
}

/// True when the medians never increase along `rows`.
pub fn non_increasing(rows: &[TrendRow]) -> bool {
    rows.windows(2).all(|w| w[1].median <= w[0].median)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_candidate_has_no_excess() {
        let p = TrendProblem {
            thresholds: vec![0.3],
            ..TrendProblem::default()
        };
        for seed in 0..5 {
            assert_eq!(p.excess_risk(16, seed).unwrap(), 0.0);
        }
    }

    #[test]
    fn huge_validation_is_nearly_optimal() {
        let p = TrendProblem::default();
        assert!(p.excess_risk(200_000, 0).unwrap() < 2e-3);
    }

    #[test]
    fn median_handles_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
