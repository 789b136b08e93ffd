#![allow(dead_code)]

use std::rc::Rc;

use lossforge::autodiff::{hvp, mixed_vjp, Tape, Var};
use lossforge::bilevel::{implicit_hypergradient, NeumannConfig};
use lossforge::data::Dataset;
use lossforge::losses::{self, AugDraws, Dictionary, InitKind, LossParams, ValObjective};
use lossforge::model::ModelSpec;
use lossforge::rng;
use lossforge::Tensor;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

pub fn randn(shape: &[usize], seed: u64, name: &str) -> Tensor {
    let mut r = rng::stream(seed, name);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| StandardNormal.sample(&mut r)).collect()).unwrap()
}

/// `||a - b|| / max(||b||, floor)`.
pub fn rel_err(a: &Tensor, b: &Tensor, floor: f64) -> f64 {
    let d: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    d / b.norm().max(floor)
}

pub fn value_of<F>(f: &F, x: &Tensor) -> f64
where
    F: for<'t> Fn(Var<'t>) -> Var<'t>,
{
    let tape = Tape::new();
    let v = f(tape.leaf(x.clone()));
    tape.value_of(v).unwrap()
}

pub fn tape_grad<F>(f: &F, x: &Tensor) -> Tensor
where
    F: for<'t> Fn(Var<'t>) -> Var<'t>,
{
    let tape = Tape::new();
    let leaf = tape.leaf(x.clone());
    let v = f(leaf);
    tape.grad(v, &[leaf]).unwrap().into_tensors().remove(0)
}

/// Central differences of a scalar function of a tensor.
pub fn fd_grad(f: impl Fn(&Tensor) -> f64, x: &Tensor, h: f64) -> Tensor {
    let mut g = x.map(|_| 0.0);
    for i in 0..x.len() {
        let mut p = x.clone();
        let mut m = x.clone();
        p.data_mut()[i] += h;
        m.data_mut()[i] -= h;
        g.data_mut()[i] = (f(&p) - f(&m)) / (2.0 * h);
    }
    g
}

pub fn grad_check<F>(f: F, x: &Tensor) -> f64
where
    F: for<'t> Fn(Var<'t>) -> Var<'t>,
{
    let analytic = tape_grad(&f, x);
    let numeric = fd_grad(|p| value_of(&f, p), x, 1e-5);
    rel_err(&analytic, &numeric, 1e-6)
}

/// Small labelled batch with `k` classes, every class present.
pub fn batch(n: usize, d: usize, k: usize, groups: Option<usize>, seed: u64) -> Dataset {
    let x = randn(&[n, d], seed, "batch-x");
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let g = groups.map(|g| (0..n).map(|i| (i / k) % g).collect());
    Dataset::new(x, labels, g, k, groups).unwrap()
}

/// Pins a closure to the higher-ranked signature the tape helpers expect.
pub fn hr1<F: for<'t> Fn(Var<'t>) -> Var<'t>>(f: F) -> F {
    f
}

pub fn hr2<F: for<'t> Fn(Var<'t>, Var<'t>) -> Var<'t>>(f: F) -> F {
    f
}

fn idx(v: &[usize]) -> Rc<[usize]> {
    v.to_vec().into()
}

/// `(name, relative error)` for every gradient check of the suite.
pub fn gradient_checks() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let x = randn(&[3, 4], 1, "x");
    out.push((
        "elementwise",
        grad_check(
            |v| {
                let a = v.exp() * v.sigmoid();
                let b = (v * v).add_scalar(1.0).ln();
                let c = (v * v).add_scalar(2.0).recip();
                (a - b.scale(0.3) + c - v.scale(0.5)).sum()
            },
            &x,
        ),
    ));
    let m = randn(&[4, 5], 2, "m");
    out.push((
        "matmul-reductions",
        grad_check(
            move |v| {
                let p = v.matmul(v.tape().constant(m.clone()));
                let r = p.sum_rows().exp().sum() + p.sum_cols().sigmoid().sum();
                r + p.t().reshape(&[15]).dot(p.t().reshape(&[15])).scale(0.1)
            },
            &x,
        ),
    ));
    let shifted = x.map(|a| a + if a >= 0.0 { 0.2 } else { -0.2 });
    out.push((
        "relu-abs-max",
        grad_check(|v| v.relu().sum() + v.abs().scale(0.5).sum() + v.max_cols().exp().sum(), &shifted),
    ));
    out.push((
        "logsumexp-gather",
        grad_check(|v| v.logsumexp_cols().sum() - v.gather_cols(&[0, 3, 1]).sum(), &x),
    ));
    let vec = randn(&[6], 3, "v");
    out.push((
        "slice-pad-take-scatter",
        grad_check(
            |v| {
                let s = v.slice(1, 3).pad(2, 7);
                let t = v.take(idx(&[0, 5, 5, 2])).scatter_add(idx(&[1, 1, 0, 3]), 4);
                s.exp().sum() + (t * t).sum() + v.mean().expand_scalar(&[3]).exp().sum()
            },
            &vec,
        ),
    ));
    let col = randn(&[3, 1], 4, "col");
    out.push((
        "expand",
        grad_check(|v| v.expand_cols(4).sigmoid().sum() + v.reshape(&[1, 3]).expand_rows(2).exp().sum(), &col),
    ));

    let spec = ModelSpec::mlp(4, &[6], 3);
    let theta = spec.init(&mut rng::stream(5, "init")).map(|a| a + 0.01);
    let ds = batch(12, 4, 3, None, 6);
    let params = perturbed_params(3, 7);
    let alpha = params.alpha();
    {
        let (spec, ds, params, alpha) = (spec.clone(), ds.clone(), params.clone(), alpha.clone());
        out.push((
            "parametric-loss-theta",
            grad_check(
                move |th| {
                    let al = th.tape().constant(alpha.clone());
                    losses::train_loss(&spec, th, al, &params, &ds, &AugDraws::none(3))
                },
                &theta,
            ),
        ));
    }
    {
        let (spec, ds, params, theta) = (spec.clone(), ds.clone(), params.clone(), theta.clone());
        out.push((
            "parametric-loss-alpha",
            grad_check(
                move |al| {
                    let th = al.tape().constant(theta.clone());
                    losses::train_loss(&spec, th, al, &params, &ds, &AugDraws::none(3))
                },
                &alpha,
            ),
        ));
    }
    let gds = batch(16, 4, 2, Some(2), 8);
    let gspec = ModelSpec::mlp(4, &[5], 2);
    let gtheta = gspec.init(&mut rng::stream(9, "init"));
    for (name, obj) in [
        ("balanced-objective", ValObjective::Balanced { lambda: 0.7 }),
        ("group-objective", ValObjective::GroupBalanced { lambda: 0.4 }),
        ("deo-objective", ValObjective::Deo { lambda: 0.5 }),
    ] {
        let (gspec, gds) = (gspec.clone(), gds.clone());
        out.push((
            name,
            grad_check(
                move |th| {
                    let x = th.tape().constant(gds.features().clone());
                    obj.loss(gspec.forward(th, x), &gds).unwrap()
                },
                &gtheta,
            ),
        ));
    }
    out
}

/// Loss parameters away from their initial values so every block matters.
pub fn perturbed_params(k: usize, seed: u64) -> LossParams {
    let priors: Vec<f64> = (0..k).map(|i| (k - i) as f64).collect();
    let s: f64 = priors.iter().sum();
    let priors: Vec<f64> = priors.iter().map(|p| p / s).collect();
    let p = LossParams::init(InitKind::LaInit, &priors, Dictionary::identity(k), false).unwrap();
    let a = p.alpha();
    let noise = randn(&[a.len()], seed, "alpha-noise");
    p.with_alpha(&a.zip_map(&noise, |x, e| x + 0.3 * e)).unwrap()
}

/// `(name, relative error)` for Hessian-vector and mixed-partial checks.
pub fn second_order_checks() -> Vec<(&'static str, f64)> {
    let spec = ModelSpec::mlp(3, &[5], 3);
    let theta = spec.init(&mut rng::stream(11, "init"));
    let ds = batch(9, 3, 3, None, 12);
    let params = perturbed_params(3, 13);
    let alpha = params.alpha();
    let v = randn(&[theta.len()], 14, "dir");
    let loss = hr2(|th, al| losses::train_loss(&spec, th, al, &params, &ds, &AugDraws::none(3)));
    let grad_at = |th: &Tensor, al: &Tensor| {
        let tape = Tape::new();
        let a = tape.leaf(th.clone());
        let b = tape.constant(al.clone());
        tape.grad(loss(a, b), &[a]).unwrap().into_tensors().remove(0)
    };
    let h = 1e-5;
    let hv = hvp(
        |th| {
            let al = th.tape().constant(alpha.clone());
            loss(th, al)
        },
        &theta,
        &v,
    )
    .unwrap();
    let plus = grad_at(&theta.zip_map(&v, |a, b| a + h * b), &alpha);
    let minus = grad_at(&theta.zip_map(&v, |a, b| a - h * b), &alpha);
    let fd = plus.zip_map(&minus, |a, b| (a - b) / (2.0 * h));
    let mixed = mixed_vjp(loss, &theta, &alpha, &v).unwrap();
    let fd_mixed = fd_grad(|al| grad_at(&theta, al).dot(&v), &alpha, h);

    let quad = randn(&[4], 15, "q");
    let diag = Tensor::vector(vec![1.0, 2.0, 3.0, 4.0]);
    let dq = diag.clone();
    let hq = hvp(
        move |th| {
            let d = th.tape().constant(dq.clone());
            (th * th * d).sum().scale(0.5)
        },
        &quad,
        &quad,
    )
    .unwrap();
    let exact = quad.zip_map(&diag, |a, b| a * b);
    vec![
        ("mlp-hvp", rel_err(&hv, &fd, 1e-6)),
        ("mlp-mixed-partial", rel_err(&mixed, &fd_mixed, 1e-6)),
        ("quadratic-hvp", rel_err(&hq, &exact, 1e-12)),
    ]
}

/// Ten-point binary logistic problem with ridge, hypergradient through the
/// parametric loss against finite differences of fully re-solved inner
/// problems. Returns `(implicit, finite-difference)`.
pub fn logistic_hypergradient_case() -> (Tensor, Tensor) {
    let spec = ModelSpec::linear(2, 2);
    let mut r = rng::stream(21, "logistic");
    let mut pts = |n: usize| {
        let labels: Vec<usize> = (0..n).map(|i| usize::from(i % 3 == 0)).collect();
        let x: Vec<f64> = labels
            .iter()
            .flat_map(|&y| {
                let s = if y == 1 { 1.0 } else { -1.0 };
                let a: f64 = StandardNormal.sample(&mut r);
                let b: f64 = StandardNormal.sample(&mut r);
                [0.8 * s + a, 0.4 * s + b]
            })
            .collect();
        Dataset::new(Tensor::matrix(n, 2, x), labels, None, 2, None).unwrap()
    };
    let train = pts(10);
    let val = pts(10);
    let params = perturbed_params(2, 22);
    let ridge = 0.1;
    let train_loss = hr2(|th, al| {
        losses::train_loss(&spec, th, al, &params, &train, &AugDraws::none(2)) + th.dot(th).scale(0.5 * ridge)
    });
    let val_loss = hr1(|th| {
        let x = th.tape().constant(val.features().clone());
        ValObjective::Balanced { lambda: 1.0 }.loss(spec.forward(th, x), &val).unwrap()
    });
    let solve = |alpha: &Tensor| -> (Tensor, DMatrix<f64>) {
        let mut theta = Tensor::zeros(&[spec.num_params()]);
        let p = theta.len();
        let mut hess = DMatrix::zeros(p, p);
        for _ in 0..50 {
            let tape = Tape::new();
            let th = tape.leaf(theta.clone());
            let al = tape.constant(alpha.clone());
            let g = tape.grad(train_loss(th, al), &[th]).unwrap().into_tensors().remove(0);
            for j in 0..p {
                let mut e = Tensor::zeros(&[p]);
                e.data_mut()[j] = 1.0;
                let a2 = alpha.clone();
                let col = hvp(
                    |th| {
                        let al = th.tape().constant(a2.clone());
                        train_loss(th, al)
                    },
                    &theta,
                    &e,
                )
                .unwrap();
                for i in 0..p {
                    hess[(i, j)] = col.data()[i];
                }
            }
            let step = hess.clone().lu().solve(&DVector::from_column_slice(g.data())).unwrap();
            for (t, s) in theta.data_mut().iter_mut().zip(step.iter()) {
                *t -= s;
            }
            if g.norm() < 1e-14 {
                break;
            }
        }
        (theta, hess)
    };
    let alpha = params.alpha();
    let (theta, hess) = solve(&alpha);
    let lmax = hess.symmetric_eigen().eigenvalues.max();
    let implicit = implicit_hypergradient(
        |th, al| Ok(train_loss(th, al)),
        |th| Ok(val_loss(th)),
        &theta,
        &alpha,
        &NeumannConfig {
            order: 2000,
            step: 0.9 / lmax,
            eta_scaling: true,
        },
    )
    .unwrap();
    let fd = fd_grad(
        |al| {
            let (th, _) = solve(al);
            let tape = Tape::new();
            let v = val_loss(tape.constant(th));
            tape.value_of(v).unwrap()
        },
        &alpha,
        1e-4,
    );
    (implicit, fd)
}
