use lossforge::losses::{parametric_ce, train_loss, AugDraws, Dictionary, InitKind, LossParams};
use lossforge::model::ModelSpec;
use lossforge::autodiff::Tape;
use lossforge::data::Dataset;
use lossforge::Tensor;
use proptest::prelude::*;

fn ce(y: usize, f: &[f64]) -> f64 {
    let m = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + f.iter().map(|v| (v - m).exp()).sum::<f64>().ln() - f[y]
}

fn logits() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn identity_parameters_give_cross_entropy(f in logits(), y in 0usize..3) {
        let v = parametric_ce(y, &f, &[1.0; 3], &[0.0; 3], &[1.0; 3]);
        prop_assert!((v - ce(y, &f)).abs() <= 1e-12);
    }

    #[test]
    fn nonnegative_and_linear_in_weight(f in logits(), l in logits(), y in 0usize..3, w in 0.1f64..5.0) {
        let d = [0.5, 1.0, 1.5];
        let one = parametric_ce(y, &f, &[1.0; 3], &l, &d);
        let scaled = parametric_ce(y, &f, &[w; 3], &l, &d);
        prop_assert!(one >= 0.0);
        prop_assert!((scaled - w * one).abs() <= 1e-10 * (1.0 + scaled.abs()));
    }

    #[test]
    fn common_shifts_cancel(f in logits(), l in logits(), y in 0usize..3, c in -3.0f64..3.0, s in 0.2f64..3.0) {
        let base = parametric_ce(y, &f, &[1.0; 3], &l, &[s; 3]);
        let lshift: Vec<f64> = l.iter().map(|v| v + c).collect();
        let fshift: Vec<f64> = f.iter().map(|v| v + c).collect();
        prop_assert!((parametric_ce(y, &f, &[1.0; 3], &lshift, &[s; 3]) - base).abs() <= 1e-10);
        prop_assert!((parametric_ce(y, &fshift, &[1.0; 3], &l, &[s; 3]) - base).abs() <= 1e-10);
    }

    #[test]
    fn logit_adjustment_is_prior_weighted_softmax(f in logits(), y in 0usize..3) {
        let pi = [0.6, 0.3, 0.1];
        let l: Vec<f64> = pi.iter().map(|p: &f64| p.ln()).collect();
        let z: f64 = (0..3).map(|k| pi[k] * f[k].exp()).sum();
        let want = -(pi[y] * f[y].exp() / z).ln();
        prop_assert!((parametric_ce(y, &f, &[1.0; 3], &l, &[1.0; 3]) - want).abs() <= 1e-10);
    }

    #[test]
    fn batch_loss_is_mean_of_examples(seed in 0u64..1000) {
        let spec = ModelSpec::linear(2, 3);
        let theta = spec.init(&mut lossforge::rng::stream(seed, "init"));
        let x = Tensor::matrix(6, 2, (0..12).map(|i| ((i as f64) * 0.7 + seed as f64).sin()).collect());
        let labels = vec![0, 1, 2, 0, 1, 2];
        let ds = Dataset::new(x.clone(), labels.clone(), None, 3, None).unwrap();
        let p = LossParams::init(InitKind::LaInit, &[0.5, 0.3, 0.2], Dictionary::identity(3), false).unwrap();
        let e = p.expand();
        let tape = Tape::new();
        let v = train_loss(&spec, tape.constant(theta.clone()), tape.constant(p.alpha()), &p, &ds, &AugDraws::none(3));
        let got = tape.value_of(v).unwrap();
        let lg = spec.logits(&theta, &x);
        let want: f64 = (0..6).map(|i| parametric_ce(labels[i], lg.row(i), &e.w, &e.l, &e.delta)).sum::<f64>() / 6.0;
        prop_assert!((got - want).abs() <= 1e-12);
    }
}

#[test]
fn worked_example_value() {
    // class 0 of 2, logits (1, 0), w = (2, 1), l = (0, 0.5), Delta = (1, 1)
    let v = parametric_ce(0, &[1.0, 0.0], &[2.0, 1.0], &[0.0, 0.5], &[1.0, 1.0]);
    let want = 2.0 * ((1.0f64.exp() + 0.5f64.exp()).ln() - 1.0);
    assert!((v - want).abs() < 1e-12, "{v}");
}
