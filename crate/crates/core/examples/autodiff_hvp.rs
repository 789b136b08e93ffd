//! Gradients and Hessian-vector products of a small MLP's cross-entropy,
//! checked against central differences.
//!
//! cargo run --release --example autodiff_hvp

use lossforge::autodiff::{hvp, Tape};
use lossforge::losses::mean_ce;
use lossforge::model::ModelSpec;
use lossforge::{rng, Tensor};
use rand_distr::{Distribution, StandardNormal};

fn main() -> lossforge::Result<()> {
    let mut r = rng::stream(0, "example");
    let spec = ModelSpec::mlp(3, &[5], 4);
    let theta = spec.init(&mut r);
    let n = 8;
    let x = Tensor::matrix(n, 3, (0..n * 3).map(|_| StandardNormal.sample(&mut r)).collect());
    let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
    let loss = |th: &Tensor| {
        let tape = Tape::new();
        let l = mean_ce(spec.forward(tape.constant(th.clone()), tape.constant(x.clone())), &labels);
        tape.value_of(l)
    };
    let grad = |th: &Tensor| -> lossforge::Result<Tensor> {
        let tape = Tape::new();
        let t = tape.leaf(th.clone());
        let l = mean_ce(spec.forward(t, tape.constant(x.clone())), &labels);
        Ok(tape.grad(l, &[t])?.into_tensors().remove(0))
    };

    let g = grad(&theta)?;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        let (mut p, mut m) = (theta.clone(), theta.clone());
        p[i] += h;
        m[i] -= h;
        let fd = (loss(&p)? - loss(&m)?) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1e-8));
    }
    println!("{} parameters, worst gradient relative error {worst:.2e}", theta.len());

    let v = Tensor::vector((0..theta.len()).map(|_| StandardNormal.sample(&mut r)).collect());
    let hv = hvp(|t| mean_ce(spec.forward(t, t.tape().constant(x.clone())), &labels), &theta, &v)?;
    let (mut p, mut m) = (theta.clone(), theta.clone());
    for i in 0..theta.len() {
        p[i] += h * v[i];
        m[i] -= h * v[i];
    }
    let (gp, gm) = (grad(&p)?, grad(&m)?);
    let fd: Vec<f64> = gp.data().iter().zip(gm.data()).map(|(a, b)| (a - b) / (2.0 * h)).collect();
    let num: f64 = fd.iter().zip(hv.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = fd.iter().map(|a| a * a).sum::<f64>().sqrt();
    println!("Hessian-vector product relative error {:.2e}", num / den);
    Ok(())
}
