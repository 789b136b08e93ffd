use serde::{Deserialize, Serialize};

use super::neumann::neumann_ihvp;
use crate::autodiff::{Tape, Var};
use crate::data::Dataset;
use crate::error::Result;
use crate::losses::{self, AugDraws, LossParams, ValObjective};
use crate::model::ModelSpec;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeumannConfig {
    pub order: usize,
    pub step: f64,
    pub eta_scaling: bool,
}

impl Default for NeumannConfig {
    fn default() -> Self {
        Self {
            order: 5,
            step: 0.1,
            eta_scaling: true,
        }
    }
}

/// Implicit-differentiation hypergradient `d L_val(theta*(alpha)) / d alpha`
/// at an (approximately) stationary `theta`, for arbitrary losses.
///
/// `v1 = dL_val/dtheta`, `p ~ H^-1 v1` by the Neumann series on the training
/// Hessian, and the result is `-p^T d^2 L_train / dtheta dalpha`. The
/// validation loss does not depend on `alpha`, so there is no direct term.
pub fn implicit_hypergradient<Ft, Fv>(
    l_train: Ft,
    l_val: Fv,
    theta: &Tensor,
    alpha: &Tensor,
    neumann: &NeumannConfig,
) -> Result<Tensor>
where
    Ft: for<'t> Fn(Var<'t>, Var<'t>) -> Result<Var<'t>>,
    Fv: for<'t> Fn(Var<'t>) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let th = tape.leaf(theta.clone());
    let al = tape.leaf(alpha.clone());
    let v1 = tape.grad(l_val(th)?, &[th])?.into_tensors().remove(0);
    let lt = l_train(th, al)?;
    tape.check()?;
    let g = tape.grad_graph(lt, &[th])?[0];
    let mark = tape.mark();
    let hvp = |v: &Tensor| {
        let gv = g.dot(tape.constant(v.clone()));
        let out = tape.grad(gv, &[th]).map(|b| b.into_tensors().remove(0));
        tape.rewind(mark);
        out
    };
    let p = neumann_ihvp(hvp, &v1, neumann.order, neumann.step, neumann.eta_scaling)?;
    let gp = g.dot(tape.constant(p));
    let mixed = tape.grad(gp, &[al])?.into_tensors().remove(0);
    Ok(mixed.map(|x| -x))
}

/// Hypergradient of `objective` on `val` through the parametric training
/// loss on `train` (with its augmentation draws).
#[allow(clippy::too_many_arguments)]
pub fn hypergradient(
    spec: &ModelSpec,
    theta: &Tensor,
    params: &LossParams,
    train: &Dataset,
    aug: &AugDraws,
    val: &Dataset,
    objective: &ValObjective,
    neumann: &NeumannConfig,
) -> Result<Tensor> {
    implicit_hypergradient(
        |th, al| Ok(losses::train_loss(spec, th, al, params, train, aug)),
        |th| {
            let x = th.tape().constant(val.features().clone());
            objective.loss(spec.forward(th, x), val)
        },
        theta,
        &params.alpha(),
        neumann,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_quadratic_is_exact() {
        let alpha = Tensor::vector(vec![1.0, -2.0, 0.5]);
        let c = Tensor::vector(vec![0.0, 1.0, 1.0]);
        for order in 0..4 {
            let h = implicit_hypergradient(
                |th, al| {
                    let d = th - al;
                    Ok(d.dot(d).scale(0.5))
                },
                |th| {
                    let d = th - th.tape().constant(c.clone());
                    Ok(d.dot(d).scale(0.5))
                },
                &alpha,
                &alpha,
                &NeumannConfig {
                    order,
                    step: 1.0,
                    eta_scaling: true,
                },
            )
            .unwrap();
            assert_eq!(h.data(), &[1.0, -3.0, -0.5]);
        }
    }
}
