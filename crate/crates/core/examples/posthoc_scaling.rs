//! Post-hoc vector scaling of a trained binary classifier's logits, tuned
//! for balanced error and for an error/DEO blend.
//!
//! cargo run --release --example posthoc_scaling

use lossforge::bilevel::{self, BilevelConfig, LrSchedule, NeumannConfig, Phase, RunLog};
use lossforge::data::{self, SpuriousSpec};
use lossforge::losses::{Dictionary, InitKind, LossParams, TrainFlags};
use lossforge::metrics::{self, PosthocGrid, PosthocObjective};
use lossforge::model::ModelSpec;
use lossforge::rng;

fn main() -> lossforge::Result<()> {
    let spec_data = SpuriousSpec {
        core_dims: 2,
        core_shift: 1.0,
        spurious_dims: 2,
        spurious_shift: 2.0,
        noise_dims: 4,
        noise_std: 1.0,
    };
    let fractions = vec![vec![0.7, 0.1], vec![0.02, 0.18]];
    let full = data::make_group_dataset(&fractions, 2000, &spec_data, 0)?;
    let split = data::split(&full, 0.8, 0)?;
    let test = data::sample_cells(&[vec![500, 500], vec![500, 500]], &spec_data, &mut rng::stream(0, "test"))?;

    let model = ModelSpec::linear(spec_data.dim(), 2);
    let cfg = BilevelConfig {
        t1: 0,
        t2: 600,
        eta_theta: 0.05,
        eta_alpha: 0.0,
        momentum: 0.9,
        weight_decay: 1e-4,
        alpha_momentum: 0.9,
        alpha_weight_decay: 1e-4,
        batch_train: 64,
        batch_val: 256,
        neumann: NeumannConfig::default(),
        train: TrainFlags::default(),
        alpha_every_n: 1,
        schedule: LrSchedule::Step,
        augment: None,
        retrain: false,
        seed: 0,
    };
    let ce = LossParams::init(InitKind::Ce, &split.train.class_priors(), Dictionary::identity(2), false)?;
    let theta = bilevel::train_fixed(&split.train, &model, &ce, &cfg, None, Phase::Retrain, &mut RunLog::default())?;
    let raw = metrics::evaluate(&model, &theta, &test)?;
    println!("raw:      std {:.4}  balanced {:.4}  deo {:.4}", raw.std_err, raw.balanced_err, raw.deo.unwrap_or(f64::NAN));

    let val_logits = model.logits(&theta, split.val.features());
    let test_logits = model.logits(&theta, test.features());
    for (name, obj) in [("balanced", PosthocObjective::Balanced), ("blend 0.5", PosthocObjective::Blend { lambda: 0.5 })] {
        let fit = metrics::posthoc_vector_scaling(&val_logits, &split.val, obj, &PosthocGrid::default())?;
        let preds = (0..test.len())
            .map(|i| {
                let r = test_logits.row(i);
                usize::from(r[1] + fit.b[1] > fit.w[0] * r[0] + fit.b[0])
            })
            .collect::<Vec<_>>();
        let r = metrics::evaluate_predictions(&preds, &test)?;
        println!(
            "{name:9} w1 = {:.2}, b1 = {:+.2}: std {:.4}  balanced {:.4}  deo {:.4}",
            fit.w[0],
            fit.b[0],
            r.std_err,
            r.balanced_err,
            r.deo.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
