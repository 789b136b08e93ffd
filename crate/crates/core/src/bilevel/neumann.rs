use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Truncated Neumann series `p = sum_{j=0}^{order} (I - eta H)^j v` built with
/// the recursion `v <- v - eta * H v`, `p <- p + v`.
///
/// With `eta_scaling` the result is `eta * p`, which approximates `H^-1 v`
/// when the spectral radius of `I - eta H` is below one.
pub fn neumann_ihvp(
    mut hvp: impl FnMut(&Tensor) -> Result<Tensor>,
    v: &Tensor,
    order: usize,
    eta: f64,
    eta_scaling: bool,
) -> Result<Tensor> {
    let mut cur = v.clone();
    let mut p = v.clone();
    for j in 1..=order {
        let hv = hvp(&cur)?;
        if hv.shape() != cur.shape() {
            return Err(Error::Shape(format!(
                "Hessian oracle returned {:?} for a {:?} direction",
                hv.shape(),
                cur.shape()
            )));
        }
        for ((c, h), q) in cur.data_mut().iter_mut().zip(hv.data()).zip(p.data_mut()) {
            *c -= eta * h;
            *q += *c;
        }
        if !p.all_finite() {
            return Err(Error::NonFiniteIteration {
                routine: "neumann series",
                iteration: j,
            });
        }
    }
    if eta_scaling {
        p = p.map(|x| eta * x);
    }
    Ok(p)
}
