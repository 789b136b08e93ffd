//! Accuracy/fairness trade-off on a two-class, two-group dataset with a
//! spurious group feature: the bilevel search swept over `lambda_val`
//! against training directly on `(1 - lambda) CE + lambda CE_deo`.
//!
//! cargo run --release --example group_pareto -- [seed]

use lossforge::bilevel::{self, BilevelConfig, LrSchedule, NeumannConfig, RunLog};
use lossforge::data::{self, SpuriousSpec};
use lossforge::losses::{GroupLossParams, TrainFlags, ValObjective};
use lossforge::metrics::{self, ParetoPoint};
use lossforge::model::ModelSpec;
use lossforge::rng;

fn main() -> lossforge::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec_data = SpuriousSpec {
        core_dims: 2,
        core_shift: 1.0,
        spurious_dims: 2,
        spurious_shift: 2.0,
        noise_dims: 16,
        noise_std: 1.0,
    };
    let fractions = vec![vec![0.45, 0.05], vec![0.05, 0.45]];
    let full = data::make_group_dataset(&fractions, 1000, &spec_data, seed)?;
    let split = data::split(&full, 0.8, seed)?;
    let test_sizes = vec![vec![500, 500], vec![500, 500]];
    let test = data::sample_cells(&test_sizes, &spec_data, &mut rng::stream(seed, "test"))?;

    let model = ModelSpec::mlp(spec_data.dim(), &[64], 2);
    let cfg = BilevelConfig {
        t1: 300,
        t2: 1000,
        eta_theta: 0.05,
        eta_alpha: 0.05,
        momentum: 0.9,
        weight_decay: 1e-4,
        alpha_momentum: 0.9,
        alpha_weight_decay: 1e-4,
        batch_train: 64,
        batch_val: 1024,
        neumann: NeumannConfig::default(),
        train: TrainFlags::default(),
        alpha_every_n: 5,
        schedule: LrSchedule::Step,
        augment: None,
        retrain: true,
        seed,
    };
    let init = GroupLossParams::uniform(2, 2).to_loss_params()?;
    let union = split.train.concat(&split.val)?;
    let (mut ab, mut base) = (Vec::new(), Vec::new());
    for lambda in [0.0, 0.2, 0.4, 0.6, 0.8] {
        let obj = ValObjective::Deo { lambda };
        let out = bilevel::autobalance(&split, &model, &init, &cfg, &obj, Some(&test))?;
        let r = out.test_report.expect("test set given");
        ab.push(ParetoPoint { lambda, std_err: r.std_err, fairness_value: r.deo.expect("group test set"), tag: "autobalance".into() });
        let theta = bilevel::train_objective(&union, &model, &obj, &cfg, None, &mut RunLog::default())?;
        let b = metrics::evaluate(&model, &theta, &test)?;
        base.push(ParetoPoint { lambda, std_err: b.std_err, fairness_value: b.deo.expect("group test set"), tag: "deo-loss".into() });
        println!(
            "lambda {lambda:.2}: autobalance err {:.4} deo {:.4} | deo-loss err {:.4} deo {:.4}",
            r.std_err, ab.last().unwrap().fairness_value, b.std_err, base.last().unwrap().fairness_value
        );
    }
    let corner = metrics::worst_corner([ab.as_slice(), base.as_slice()]);
    println!(
        "hypervolume vs {corner:?}: autobalance {:.5}, deo-loss {:.5}",
        metrics::hypervolume(&ab, corner),
        metrics::hypervolume(&base, corner)
    );
    Ok(())
}
