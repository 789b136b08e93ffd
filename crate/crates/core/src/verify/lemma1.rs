use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two inputs whose top-two class likelihoods are scaled copies of each
/// other, `x2 = gamma * x1`, both sitting on the Bayes decision boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Case {
    pub delta: [f64; 2],
    pub l: [f64; 2],
    pub gamma: f64,
    pub x1_likelihoods: [f64; 2],
    pub x2_likelihoods: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma1Report {
    /// Decisions at `(x1, +), (x1, -), (x2, +), (x2, -)`.
    pub bayes_decisions: Vec<usize>,
    pub rule_decisions: Vec<usize>,
    pub disagrees: bool,
}

impl Lemma1Case {
    /// Places `x1` where both the Bayes rule for weights `c_y = e^{-l_y}` and
    /// the loss-induced rule tie, i.e. likelihoods `e^{l_y}`, and scales by
    /// `gamma` for `x2`.
    pub fn construct(delta: [f64; 2], l: [f64; 2], gamma: f64) -> Result<Self> {
        let x1 = [l[0].exp(), l[1].exp()];
        let case = Self {
            delta,
            l,
            gamma,
            x1_likelihoods: x1,
            x2_likelihoods: [gamma * x1[0], gamma * x1[1]],
        };
        case.validate()?;
        Ok(case)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Config(format!("delta must be positive, got {:?}", self.delta)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) || self.l.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("gamma must be positive and l finite".into()));
        }
        for p in [self.x1_likelihoods, self.x2_likelihoods] {
            if p.iter().any(|&v| !(v > 0.0 && v < 1.0)) || p[0] + p[1] > 1.0 {
                return Err(Error::Config(format!("likelihoods {p:?} are not a valid sub-distribution")));
            }
        }
        Ok(())
    }
}

const EPS: f64 = 1e-9;

fn argmax2(s: [f64; 2]) -> usize {
    usize::from(s[1] > s[0])
}

/// Bayes decision `argmax c_y eta_y` with `c_y = e^{-l_y}` against the
/// population minimiser of the parametric loss, `argmax (log eta_y - l_y) / delta_y`,
/// on both inputs with the first likelihood nudged up and down.
pub fn lemma1_check(case: &Lemma1Case) -> Result<Lemma1Report> {
    case.validate()?;
    let mut bayes = Vec::with_capacity(4);
    let mut rule = Vec::with_capacity(4);
    for p in [case.x1_likelihoods, case.x2_likelihoods] {
        for sign in [1.0, -1.0] {
            let eta = [p[0] * (1.0 + sign * EPS), p[1]];
            let score = |y: usize| eta[y].ln() - case.l[y];
            bayes.push(argmax2([score(0), score(1)]));
            rule.push(argmax2([score(0) / case.delta[0], score(1) / case.delta[1]]));
        }
    }
    let disagrees = bayes != rule;
    Ok(Lemma1Report {
        bayes_decisions: bayes,
        rule_decisions: rule,
        disagrees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn la() -> [f64; 2] {
        [0.25f64.ln(), 0.15f64.ln()]
    }

    #[test]
    fn distinct_scales_disagree() {
        let r = lemma1_check(&Lemma1Case::construct([1.0, 2.0], la(), 2.0).unwrap()).unwrap();
        assert!(r.disagrees);
        assert_eq!(r.bayes_decisions, vec![0, 1, 0, 1]);
    }

    #[test]
    fn boundary_cases_agree() {
        for g in [0.5, 1.5, 2.0] {
            let c = Lemma1Case::construct([1.5, 1.5], la(), g).unwrap();
            assert!(!lemma1_check(&c).unwrap().disagrees);
        }
        let c = Lemma1Case::construct([1.0, 2.0], la(), 1.0).unwrap();
        assert!(!lemma1_check(&c).unwrap().disagrees);
    }

    #[test]
    fn rejects_invalid_likelihoods() {
        assert!(Lemma1Case::construct([1.0, 2.0], la(), 3.0).is_err());
    }
}
