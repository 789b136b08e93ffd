//! Bilevel search over loss hyperparameters: lower-level SGD on the model,
//! upper-level implicit-differentiation hypergradient steps on `alpha`.

mod hypergrad;
mod neumann;
mod search;
mod sgd;

pub use hypergrad::{hypergradient, implicit_hypergradient, NeumannConfig};
pub use neumann::neumann_ihvp;
pub use search::{autobalance, train_fixed, train_objective, AutoBalanceOutput, BilevelConfig, EpochRecord, Phase, RunLog};
pub use sgd::{sgd_step, LrSchedule, SgdState};
