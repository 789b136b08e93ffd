use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::bilevel::{implicit_hypergradient, neumann_ihvp, NeumannConfig};
use crate::error::Result;
use crate::rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeumannRow {
    pub order: usize,
    pub value: f64,
    pub exact: f64,
    pub error: f64,
}

/// The scaled series for `H = 2I`, `eta = 0.25`, `v = e_1` against the exact
/// inverse `0.5`.
pub fn neumann_two_i_table(max_order: usize) -> Result<Vec<NeumannRow>> {
    let v = Tensor::vector(vec![1.0]);
    (0..=max_order)
        .map(|order| {
            let p = neumann_ihvp(|x: &Tensor| Ok(x.map(|a| 2.0 * a)), &v, order, 0.25, true)?;
            let value = p.data()[0];
            Ok(NeumannRow {
                order,
                value,
                exact: 0.5,
                error: (value - 0.5).abs(),
            })
        })
        .collect()
}

/// Random `d x d` SPD matrix `B B^T / d + shift I`.
pub fn random_spd(d: usize, shift: f64, seed: u64) -> DMatrix<f64> {
    let mut r = rng::stream(seed, "spd");
    let b: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut r));
    &b * b.transpose() / d as f64 + DMatrix::<f64>::identity(d, d) * shift
}

/// Errors `|| eta * sum_{j<=order} (I - eta A)^j v - A^-1 v ||` for
/// `eta = 0.9 / lambda_max`, orders `0..=max_order`.
pub fn neumann_spd_errors(a: &DMatrix<f64>, v: &DVector<f64>, max_order: usize) -> Result<Vec<f64>> {
    let lmax = a.clone().symmetric_eigen().eigenvalues.max();
    let eta = 0.9 / lmax;
    let exact = a.clone().lu().solve(v).expect("SPD matrix is invertible");
    let vt = Tensor::vector(v.iter().copied().collect());
    let hvp = |x: &Tensor| {
        let y = a * DVector::from_column_slice(x.data());
        Ok(Tensor::vector(y.iter().copied().collect()))
    };
    (0..=max_order)
        .map(|order| {
            let p = neumann_ihvp(hvp, &vt, order, eta, true)?;
            Ok((DVector::from_column_slice(p.data()) - &exact).norm())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadraticCheck {
    pub analytic: Vec<f64>,
    pub computed: Vec<f64>,
    pub rel_err: f64,
}

/// Lower level `theta^T A theta / 2 - alpha^T theta` (so `theta* = A^-1 alpha`),
/// upper level `||theta - c||^2 / 2`; the hypergradient is
/// `A^-1 (A^-1 alpha - c)`.
pub fn quadratic_hypergradient_check(d: usize, order: usize, seed: u64) -> Result<QuadraticCheck> {
    let a = random_spd(d, 0.5, seed);
    let mut r = rng::stream(seed, "quadratic");
    let alpha: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut r));
    let c: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut r));
    let lu = a.clone().lu();
    let theta = lu.solve(&alpha).expect("SPD matrix is invertible");
    let analytic = lu.solve(&(&theta - &c)).expect("SPD matrix is invertible");
    let lmax = a.clone().symmetric_eigen().eigenvalues.max();
    let at = Tensor::matrix(d, d, a.transpose().iter().copied().collect());
    let ct = Tensor::vector(c.iter().copied().collect());
    let computed = implicit_hypergradient(
        |th, al| {
            let tape = th.tape();
            let ath = tape.constant(at.clone()).matmul(th.reshape(&[d, 1])).reshape(&[d]);
            Ok(ath.dot(th).scale(0.5) - al.dot(th))
        },
        |th| {
            let diff = th - th.tape().constant(ct.clone());
            Ok(diff.dot(diff).scale(0.5))
        },
        &Tensor::vector(theta.iter().copied().collect()),
        &Tensor::vector(alpha.iter().copied().collect()),
        &NeumannConfig {
            order,
            step: 0.9 / lmax,
            eta_scaling: true,
        },
    )?;
    let comp = DVector::from_column_slice(computed.data());
    let rel_err = (&comp - &analytic).norm() / analytic.norm();
    Ok(QuadraticCheck {
        analytic: analytic.iter().copied().collect(),
        computed: computed.into_data(),
        rel_err,
    })
}
