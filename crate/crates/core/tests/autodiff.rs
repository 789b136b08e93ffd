mod common;

use common::{grad_check, randn, rel_err, tape_grad};
use lossforge::autodiff::{hvp, Tape};
use lossforge::Tensor;
use proptest::prelude::*;

#[test]
fn first_order_against_finite_differences() {
    for (name, err) in common::gradient_checks() {
        assert!(err <= 1e-5, "{name}: relative error {err:e}");
    }
}

#[test]
fn second_order_against_finite_differences() {
    for (name, err) in common::second_order_checks() {
        assert!(err <= 1e-4, "{name}: relative error {err:e}");
    }
}

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hessian_is_symmetric(x in vec3(), u in vec3(), v in vec3()) {
        let f = common::hr1(|t| (t.exp() * t.sigmoid()).sum() + t.reshape(&[1, 3]).logsumexp_cols().sum());
        let x = Tensor::vector(x);
        let (u, v) = (Tensor::vector(u), Tensor::vector(v));
        let hu = hvp(f, &x, &u).unwrap();
        let hv = hvp(f, &x, &v).unwrap();
        prop_assert!((hu.dot(&v) - hv.dot(&u)).abs() <= 1e-9 * (1.0 + hu.norm() * v.norm()));
    }

    #[test]
    fn gradient_is_linear_in_the_seed(x in vec3(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let x = Tensor::vector(x);
        let g1 = tape_grad(&|t| t.exp().sum(), &x);
        let g2 = tape_grad(&|t| (t * t).sum(), &x);
        let g = tape_grad(&|t| t.exp().sum().scale(a) + (t * t).sum().scale(b), &x);
        let want = g1.zip_map(&g2, |p, q| a * p + b * q);
        prop_assert!(rel_err(&g, &want, 1e-9) <= 1e-12);
    }

    #[test]
    fn evaluation_is_deterministic(seed in 0u64..1000) {
        let x = randn(&[2, 3], seed, "det");
        let f = common::hr1(|t| t.logsumexp_cols().sum() + t.sigmoid().sum());
        prop_assert_eq!(tape_grad(&f, &x), tape_grad(&f, &x));
    }

    #[test]
    fn random_points_pass_gradient_checks(seed in 0u64..1000) {
        let x = randn(&[3, 3], seed, "pt");
        let err = grad_check(|t| t.matmul(t).sigmoid().sum() + t.logsumexp_cols().sum(), &x);
        prop_assert!(err <= 1e-5, "{}", err);
    }
}

#[test]
fn rewinding_bounds_tape_growth() {
    let tape = Tape::new();
    let x = tape.leaf(Tensor::vector(vec![0.5, -1.0]));
    let base = tape.len();
    let mark = tape.mark();
    for _ in 0..100 {
        let _ = tape.grad(x.exp().sum(), &[x]).unwrap();
        tape.rewind(mark);
    }
    assert_eq!(tape.len(), base);
}

