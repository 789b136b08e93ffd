//! Executable checks of the theory behind the parametric loss: the
//! inconsistency of multiplicative logit scaling, the cost-sensitive SVM and
//! its augmentation equivalent, ridgeless directional convergence, and the
//! validation-size trend of multi-objective model selection.

mod lemma1;
mod lemma2;
mod oracles;
mod ridgeless;
mod svm;
mod theorem1;

use serde::Serialize;

pub use lemma1::{lemma1_check, Lemma1Case, Lemma1Report};
pub use lemma2::{gaussian_pair, lemma2_check, random_mean, Lemma2Report};
pub use oracles::{
    neumann_spd_errors, neumann_two_i_table, quadratic_hypergradient_check, random_spd, NeumannRow, QuadraticCheck,
};
pub use ridgeless::{ridgeless_direction, BinaryLoss, RidgelessTrace};
pub use svm::{cosine, solve_augmented_svm_2d, solve_cs_svm, solve_margins, BinaryData, SvmSolution};
pub use theorem1::{non_increasing, theorem1_trend, TrendProblem, TrendRow};

use crate::error::Result;
use crate::rng;

pub const DELTA_GRID: [f64; 4] = [0.3, 0.5, 0.8, 0.95];

#[derive(Clone, Debug, Serialize)]
pub struct CheckVerdict {
    pub name: String,
    pub pass: bool,
    pub detail: serde_json::Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<CheckVerdict>,
}

/// `count` random separable planar instances, cycling through every pair of
/// `DELTA_GRID` values.
pub fn lemma2_suite(count: usize, seed: u64) -> Result<Vec<Lemma2Report>> {
    let mut rng = rng::stream(seed, "verify/lemma2");
    (0..count)
        .map(|i| {
            let dp = DELTA_GRID[i % 4];
            let dm = DELTA_GRID[(i / 4) % 4];
            let mean = random_mean(2.0, &mut rng);
            let data = gaussian_pair(20, mean, 0.8, 0.2, &mut rng)?;
            lemma2_check(&data, dp, dm)
        })
        .collect()
}

/// Scale-inconsistency checks on a grid of scales and likelihood ratios; returns
/// `(case, report, expected_disagreement)`.
pub fn lemma1_suite() -> Result<Vec<(Lemma1Case, Lemma1Report, bool)>> {
    let l = [0.25f64.ln(), 0.15f64.ln()];
    let mut out = Vec::new();
    for delta in [[1.0, 1.0], [1.0, 2.0], [2.0, 1.0], [0.5, 0.7], [1.3, 1.3]] {
        for gamma in [0.25, 0.5, 0.9, 1.0, 1.1, 2.0] {
            let case = Lemma1Case::construct(delta, l, gamma)?;
            let report = lemma1_check(&case)?;
            let expected = delta[0] != delta[1] && gamma != 1.0;
            out.push((case, report, expected));
        }
    }
    Ok(out)
}

/// Ridgeless runs for a symmetric and an asymmetric loss on one instance.
pub fn ridgeless_suite(seed: u64) -> Result<Vec<(BinaryLoss, RidgelessTrace)>> {
    let mut rng = rng::stream(seed, "verify/ridgeless");
    let data = gaussian_pair(20, [1.6, 1.2], 0.8, 0.2, &mut rng)?;
    let asym = BinaryLoss {
        w_plus: 2.0,
        l_plus: -0.5,
        l_minus: 0.3,
        delta_plus: 0.4,
        delta_minus: 0.9,
        ..BinaryLoss::symmetric()
    };
    [BinaryLoss::symmetric(), asym]
        .into_iter()
        .map(|loss| Ok((loss, ridgeless_direction(&data, &loss, RIDGELESS_EPOCHS, RIDGELESS_STEP)?)))
        .collect()
}

pub const RIDGELESS_EPOCHS: usize = 20_000;
pub const RIDGELESS_STEP: f64 = 0.5;
pub const TREND_SIZES: [usize; 3] = [32, 128, 512];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Lemma1,
    Lemma2,
    Ridgeless,
    Neumann,
    Hypergrad,
    Theorem1,
    All,
}

impl Check {
    const EACH: [Check; 6] = [
        Check::Lemma1,
        Check::Lemma2,
        Check::Ridgeless,
        Check::Neumann,
        Check::Hypergrad,
        Check::Theorem1,
    ];

    fn name(self) -> &'static str {
        match self {
            Check::Lemma1 => "lemma1",
            Check::Lemma2 => "lemma2",
            Check::Ridgeless => "ridgeless",
            Check::Neumann => "neumann",
            Check::Hypergrad => "hypergrad",
            Check::Theorem1 => "theorem1",
            Check::All => "all",
        }
    }
}

fn single(check: Check, seed: u64) -> Result<CheckVerdict> {
    let (pass, detail) = match check {
        Check::Lemma2 => {
            let r = lemma2_suite(24, seed)?;
            (r.iter().all(|r| r.pass), serde_json::to_value(&r)?)
        }
        Check::Ridgeless => {
            let rl = ridgeless_suite(seed)?;
            let detail: Vec<_> = rl
                .iter()
                .map(|(loss, t)| {
                    serde_json::json!({"loss": loss, "final_cosine": t.final_cosine(), "tail_drop": t.tail_drop()})
                })
                .collect();
            (
                rl.iter().all(|(_, t)| t.final_cosine() >= 0.999),
                serde_json::Value::Array(detail),
            )
        }
        Check::Lemma1 => {
            let l1 = lemma1_suite()?;
            let detail: Vec<_> = l1
                .iter()
                .map(|(c, r, e)| {
                    serde_json::json!({"delta": c.delta, "gamma": c.gamma, "disagrees": r.disagrees, "expected": e})
                })
                .collect();
            (
                l1.iter().all(|(_, r, e)| r.disagrees == *e),
                serde_json::Value::Array(detail),
            )
        }
        Check::Neumann => {
            let rows = neumann_two_i_table(10)?;
            let pass = rows.windows(2).all(|w| w[1].error < w[0].error) && (rows[3].value - 0.46875).abs() < 1e-15;
            (pass, serde_json::to_value(&rows)?)
        }
        Check::Hypergrad => {
            let q = quadratic_hypergradient_check(4, 400, seed)?;
            (q.rel_err <= 1e-6, serde_json::to_value(&q)?)
        }
        Check::Theorem1 => {
            let seeds: Vec<u64> = (0..20).map(|i| seed.wrapping_add(i)).collect();
            let rows = theorem1_trend(&TrendProblem::default(), &TREND_SIZES, &seeds)?;
            (non_increasing(&rows), serde_json::to_value(&rows)?)
        }
        Check::All => unreachable!("expanded by run"),
    };
    Ok(CheckVerdict {
        name: check.name().into(),
        pass,
        detail,
    })
}

/// Runs `which` (every check for `Check::All`) and collects the verdicts.
pub fn run(which: Check, seed: u64) -> Result<Verdict> {
    let list: Vec<Check> = if which == Check::All { Check::EACH.to_vec() } else { vec![which] };
    let checks = list.into_iter().map(|c| single(c, seed)).collect::<Result<Vec<_>>>()?;
    Ok(Verdict {
        seed,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

pub fn run_all(seed: u64) -> Result<Verdict> {
    run(Check::All, seed)
}
