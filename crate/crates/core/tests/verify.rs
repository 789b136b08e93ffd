use lossforge::rng;
use lossforge::verify::{
    cosine, gaussian_pair, lemma1_check, lemma2_check, ridgeless_direction, solve_augmented_svm_2d, solve_cs_svm,
    BinaryData, BinaryLoss, Lemma1Case,
};
use proptest::prelude::*;

/// Minimum-norm `w` with `y_i w . x_i >= b_i` in the plane by enumerating
/// every active set of size one or two.
fn enumerate_oracle(data: &BinaryData, b: &[f64]) -> Option<Vec<f64>> {
    let n = data.len();
    let row = |i: usize| [data.y[i] * data.x[i][0], data.y[i] * data.x[i][1]];
    let mut cands = Vec::new();
    for i in 0..n {
        let a = row(i);
        let s = b[i] / (a[0] * a[0] + a[1] * a[1]);
        cands.push(vec![s * a[0], s * a[1]]);
        for j in i + 1..n {
            let c = row(j);
            let det = a[0] * c[1] - a[1] * c[0];
            if det.abs() > 1e-12 {
                cands.push(vec![(b[i] * c[1] - b[j] * a[1]) / det, (a[0] * b[j] - c[0] * b[i]) / det]);
            }
        }
    }
    cands
        .into_iter()
        .filter(|w| (0..n).all(|k| data.margin(k, w) >= b[k] - 1e-9))
        .min_by(|u, v| (u[0].hypot(u[1])).total_cmp(&v[0].hypot(v[1])))
}

fn margins(data: &BinaryData, dp: f64, dm: f64) -> Vec<f64> {
    data.y.iter().map(|&y| if y > 0.0 { 1.0 / dp } else { 1.0 / dm }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cs_svm_matches_enumeration(seed in 0u64..10_000, n in 2usize..7, dp in 0.2f64..1.0, dm in 0.2f64..1.0) {
        let data = gaussian_pair(n, [1.5, 1.0], 0.9, 0.1, &mut rng::stream(seed, "svm")).unwrap();
        let s = solve_cs_svm(&data, dp, dm).unwrap();
        let w = enumerate_oracle(&data, &margins(&data, dp, dm)).unwrap();
        prop_assert!((s.objective - w[0].hypot(w[1])).abs() <= 1e-8 * s.objective);
        prop_assert!(s.kkt_residual(&data) <= 1e-8);
        prop_assert!(s.dual.iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn equal_deltas_scale_the_plain_svm(seed in 0u64..10_000, d in 0.2f64..1.0) {
        let data = gaussian_pair(8, [1.0, 2.0], 0.8, 0.2, &mut rng::stream(seed, "svm")).unwrap();
        let plain = solve_cs_svm(&data, 1.0, 1.0).unwrap();
        let s = solve_cs_svm(&data, d, d).unwrap();
        prop_assert!(cosine(&plain.w, &s.w) > 1.0 - 1e-12);
        prop_assert!((s.objective * d - plain.objective).abs() <= 1e-9 * plain.objective);
    }

    #[test]
    fn augmented_solutions_pass_an_independent_audit(seed in 0u64..10_000, ep in 0.0f64..0.5, em in 0.0f64..0.5) {
        let data = gaussian_pair(10, [2.0, 1.0], 0.7, 0.6, &mut rng::stream(seed, "aug")).unwrap();
        if let Ok(s) = solve_augmented_svm_2d(&data, ep, em) {
            let n = s.w[0].hypot(s.w[1]);
            for i in 0..data.len() {
                let e = if data.y[i] > 0.0 { ep } else { em };
                prop_assert!(data.margin(i, &s.w) - e * n >= 1.0 - 1e-8);
            }
        }
    }

    #[test]
    fn augmentation_equivalence_on_random_instances(seed in 0u64..10_000, i in 0usize..4, j in 0usize..4) {
        let grid = [0.3, 0.5, 0.8, 0.95];
        let data = gaussian_pair(20, [1.4, 1.4], 0.8, 0.2, &mut rng::stream(seed, "l2")).unwrap();
        let r = lemma2_check(&data, grid[i], grid[j]).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn scale_rule_disagrees_exactly_off_the_boundary(d1 in 0.3f64..3.0, d2 in 0.3f64..3.0, g in 0.3f64..2.0) {
        let case = Lemma1Case::construct([d1, d2], [0.3f64.ln(), 0.2f64.ln()], g).unwrap();
        let r = lemma1_check(&case).unwrap();
        let gap = ((g.ln()) * (1.0 / d1 - 1.0 / d2)).abs();
        prop_assume!(gap == 0.0 || gap > 1e-6);
        prop_assert_eq!(r.disagrees, gap > 0.0);
    }
}

#[test]
fn cs_svm_one_dimensional_example() {
    let data = BinaryData::new(vec![vec![2.0], vec![-1.0]], vec![1.0, -1.0]).unwrap();
    let s = solve_cs_svm(&data, 0.5, 1.0).unwrap();
    assert!((s.w[0] - 1.0).abs() < 1e-12);
}

#[test]
fn augmentation_equivalence_forty_point_gaussian_pair() {
    let data = gaussian_pair(20, [1.5, 1.0], 0.8, 0.2, &mut rng::stream(3, "l2")).unwrap();
    assert_eq!(data.len(), 40);
    assert!(lemma2_check(&data, 0.5, 0.8).unwrap().pass);
}

#[test]
fn ridgeless_converges_to_cost_sensitive_direction() {
    let data = gaussian_pair(20, [1.6, 1.2], 0.8, 0.2, &mut rng::stream(5, "rl")).unwrap();
    let asym = BinaryLoss {
        delta_plus: 0.3,
        delta_minus: 0.9,
        l_plus: 1.0,
        ..BinaryLoss::symmetric()
    };
    for loss in [BinaryLoss::symmetric(), asym] {
        let t = ridgeless_direction(&data, &loss, 20_000, 0.5).unwrap();
        assert!(t.final_cosine() >= 0.999, "{}", t.final_cosine());
        assert!(t.tail_drop() <= 1e-9, "{}", t.tail_drop());
    }
}
