use log::{debug, info};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::hypergrad::{hypergradient, NeumannConfig};
use super::sgd::{sgd_step, LrSchedule, SgdState};
use crate::autodiff::Tape;
use crate::data::{AugmentPolicy, Dataset, SplitDataset};
use crate::error::{Error, Result};
use crate::losses::{self, AugDraws, LossParams, TrainFlags, ValObjective};
use crate::metrics::{self, MetricsReport};
use crate::model::ModelSpec;
use crate::rng::{self, Rng};
use crate::tensor::Tensor;

const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BilevelConfig {
    /// Warm-up iterations (`theta` only).
    pub t1: usize,
    /// Total search iterations; also the retrain length.
    pub t2: usize,
    pub eta_theta: f64,
    pub eta_alpha: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    #[serde(default = "default_momentum")]
    pub alpha_momentum: f64,
    #[serde(default = "default_wd")]
    pub alpha_weight_decay: f64,
    pub batch_train: usize,
    pub batch_val: usize,
    #[serde(default)]
    pub neumann: NeumannConfig,
    #[serde(default)]
    pub train: TrainFlags,
    #[serde(default = "one")]
    pub alpha_every_n: usize,
    #[serde(default = "default_schedule")]
    pub schedule: LrSchedule,
    #[serde(default)]
    pub augment: Option<AugmentPolicy>,
    #[serde(default = "default_true")]
    pub retrain: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_momentum() -> f64 {
    0.9
}

fn default_wd() -> f64 {
    1e-4
}

fn one() -> usize {
    1
}

fn default_schedule() -> LrSchedule {
    LrSchedule::Step
}

fn default_true() -> bool {
    true
}

impl BilevelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.t2 < self.t1 || self.t2 == 0 {
            return bad("need t2 >= t1 and t2 > 0");
        }
        if !(self.eta_theta > 0.0) || !(self.eta_alpha > 0.0) || !(self.neumann.step > 0.0) {
            return bad("step sizes must be positive");
        }
        if self.batch_train == 0 || self.batch_val == 0 || self.alpha_every_n == 0 {
            return bad("batch sizes and alpha_every_n must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) || !(0.0..1.0).contains(&self.alpha_momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        Ok(())
    }
}

/// One row of the run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: Phase,
    pub epoch: usize,
    pub iteration: usize,
    pub train_err: f64,
    pub train_balanced_err: f64,
    pub val_err: Option<f64>,
    pub test_err: Option<f64>,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub alpha: Vec<f64>,
    pub l: Vec<f64>,
    pub delta: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Search,
    Retrain,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<EpochRecord>,
}

impl RunLog {
    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &EpochRecord> {
        self.records.iter().filter(move |r| r.phase == phase)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        Ok(s)
    }
}

#[derive(Clone, Debug)]
pub struct AutoBalanceOutput {
    /// `theta` at the end of the search phase.
    pub theta_search: Tensor,
    /// `theta` after retraining (equals `theta_search` when retraining is off).
    pub theta: Tensor,
    pub alpha: LossParams,
    pub log: RunLog,
    pub test_report: Option<MetricsReport>,
}

/// Epoch-wise shuffled mini-batches without replacement.
struct Sampler {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
    rng: Rng,
}

impl Sampler {
    fn new(n: usize, batch: usize, rng: Rng) -> Self {
        let mut s = Self {
            order: (0..n).collect(),
            pos: n,
            batch: batch.min(n),
            rng,
        };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.pos = 0;
    }

    fn next(&mut self) -> Vec<usize> {
        if self.batch == self.order.len() {
            return (0..self.batch).collect();
        }
        if self.pos + self.batch > self.order.len() {
            self.reshuffle();
        }
        let b = self.order[self.pos..self.pos + self.batch].to_vec();
        self.pos += self.batch;
        b
    }
}

fn iters_per_epoch(n: usize, batch: usize) -> usize {
    n.div_ceil(batch.min(n)).max(1)
}

fn diverged(epoch: usize, e: Error) -> Error {
    match e {
        Error::Numerical { .. } | Error::NonFiniteIteration { .. } => Error::Divergence {
            epoch,
            reason: e.to_string(),
        },
        other => other,
    }
}

/// Loss value and `theta` gradient of the training loss on one batch.
fn theta_grad(
    spec: &ModelSpec,
    theta: &Tensor,
    params: &LossParams,
    batch: &Dataset,
    aug: &AugDraws,
) -> Result<(f64, Tensor)> {
    let tape = Tape::new();
    let th = tape.leaf(theta.clone());
    let al = tape.constant(params.alpha());
    let loss = losses::train_loss(spec, th, al, params, batch, aug);
    let value = tape.value_of(loss)?;
    let g = tape.grad(loss, &[th])?.into_tensors().remove(0);
    Ok((value, g))
}

struct Lower<'a> {
    spec: &'a ModelSpec,
    cfg: &'a BilevelConfig,
    data: &'a Dataset,
    sampler: Sampler,
    aug_rng: Rng,
    policy: AugmentPolicy,
    theta: Tensor,
    state: SgdState,
}

impl<'a> Lower<'a> {
    fn new(spec: &'a ModelSpec, cfg: &'a BilevelConfig, data: &'a Dataset, phase: &str) -> Self {
        let k = spec.num_classes;
        Self {
            spec,
            cfg,
            data,
            sampler: Sampler::new(data.len(), cfg.batch_train, rng::stream(cfg.seed, &format!("batches/{phase}"))),
            aug_rng: rng::stream(cfg.seed, &format!("augment/{phase}")),
            policy: cfg.augment.clone().unwrap_or_else(|| AugmentPolicy::none(k)),
            theta: spec.init(&mut rng::stream(cfg.seed, "init")),
            state: SgdState::new(),
        }
    }

    fn draws(&mut self, batch: &Dataset, params: &LossParams) -> AugDraws {
        let trainable = params.eps_embed.is_some();
        AugDraws::sample(batch, &self.policy, trainable, &mut self.aug_rng)
    }

    /// One SGD step on `theta`; returns the batch loss.
    fn step(&mut self, params: &LossParams, it: usize, epoch: usize) -> Result<f64> {
        let spec = self.spec;
        self.step_with(it, epoch, |theta, batch, lower| {
            let aug = lower.draws(batch, params);
            theta_grad(spec, theta, params, batch, &aug)
        })
    }

    fn step_with(
        &mut self,
        it: usize,
        epoch: usize,
        grad: impl FnOnce(&Tensor, &Dataset, &mut Self) -> Result<(f64, Tensor)>,
    ) -> Result<f64> {
        let idx = self.sampler.next();
        let batch = self.data.subset(&idx)?;
        let theta = self.theta.clone();
        let (loss, g) = grad(&theta, &batch, self).map_err(|e| diverged(epoch, e))?;
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(Error::Divergence {
                epoch,
                reason: format!("training loss {loss} at iteration {it}"),
            });
        }
        let lr = self.cfg.schedule.lr(self.cfg.eta_theta, it, self.cfg.t2);
        sgd_step(&mut self.theta, &g, &mut self.state, lr, self.cfg.momentum, self.cfg.weight_decay);
        if !self.theta.all_finite() {
            return Err(Error::Divergence {
                epoch,
                reason: format!("non-finite parameters after iteration {it}"),
            });
        }
        Ok(loss)
    }
}

struct EvalSets<'a> {
    train: &'a Dataset,
    val: Option<(&'a Dataset, &'a ValObjective)>,
    test: Option<&'a Dataset>,
}

#[allow(clippy::too_many_arguments)]
fn record(
    phase: Phase,
    epoch: usize,
    iteration: usize,
    spec: &ModelSpec,
    theta: &Tensor,
    params: &LossParams,
    train_loss: f64,
    sets: &EvalSets<'_>,
) -> Result<EpochRecord> {
    let tr = metrics::evaluate(spec, theta, sets.train)?;
    let (val_err, val_loss) = match sets.val {
        Some((v, obj)) => (
            Some(metrics::evaluate(spec, theta, v)?.balanced_err),
            Some(losses::objective_value(obj, spec, theta, v)?),
        ),
        None => (None, None),
    };
    let test_err = match sets.test {
        Some(t) => Some(metrics::evaluate(spec, theta, t)?.balanced_err),
        None => None,
    };
    let e = params.expand();
    Ok(EpochRecord {
        phase,
        epoch,
        iteration,
        train_err: tr.std_err,
        train_balanced_err: tr.balanced_err,
        val_err,
        test_err,
        train_loss,
        val_loss,
        alpha: params.alpha().into_data(),
        l: e.l,
        delta: e.delta,
    })
}

/// Trains `theta` from its seeded initialization on `data` with frozen loss
/// parameters for `cfg.t2` iterations.
pub fn train_fixed(
    data: &Dataset,
    spec: &ModelSpec,
    params: &LossParams,
    cfg: &BilevelConfig,
    test: Option<&Dataset>,
    phase: Phase,
    log: &mut RunLog,
) -> Result<Tensor> {
    let mut lower = Lower::new(spec, cfg, data, phase_name(phase));
    let ipe = iters_per_epoch(data.len(), cfg.batch_train);
    let mut running = 0.0;
    for it in 0..cfg.t2 {
        let epoch = it / ipe;
        running += lower.step(params, it, epoch)?;
        if (it + 1) % ipe == 0 || it + 1 == cfg.t2 {
            let n = (it % ipe + 1) as f64;
            let sets = EvalSets { train: data, val: None, test };
            log.records.push(record(phase, epoch, it + 1, spec, &lower.theta, params, running / n, &sets)?);
            running = 0.0;
        }
    }
    Ok(lower.theta)
}

/// Trains `theta` on `data` with `objective` itself as the training loss,
/// e.g. the `(1 - lambda) CE + lambda CE_deo` fairness blend.
pub fn train_objective(
    data: &Dataset,
    spec: &ModelSpec,
    objective: &ValObjective,
    cfg: &BilevelConfig,
    test: Option<&Dataset>,
    log: &mut RunLog,
) -> Result<Tensor> {
    objective.validate()?;
    let mut lower = Lower::new(spec, cfg, data, "retrain");
    let params = LossParams::init(
        losses::InitKind::Ce,
        &vec![1.0 / spec.num_classes as f64; spec.num_classes],
        losses::Dictionary::identity(spec.num_classes),
        false,
    )?;
    let ipe = iters_per_epoch(data.len(), cfg.batch_train);
    let mut running = 0.0;
    for it in 0..cfg.t2 {
        let epoch = it / ipe;
        running += lower.step_with(it, epoch, |theta, batch, _| {
            let tape = Tape::new();
            let th = tape.leaf(theta.clone());
            let x = tape.constant(batch.features().clone());
            let loss = objective.loss(spec.forward(th, x), batch)?;
            let value = tape.value_of(loss)?;
            let g = tape.grad(loss, &[th])?.into_tensors().remove(0);
            Ok((value, g))
        })?;
        if (it + 1) % ipe == 0 || it + 1 == cfg.t2 {
            let n = (it % ipe + 1) as f64;
            let sets = EvalSets { train: data, val: None, test };
            log.records.push(record(Phase::Retrain, epoch, it + 1, spec, &lower.theta, &params, running / n, &sets)?);
            running = 0.0;
        }
    }
    Ok(lower.theta)
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Search => "search",
        Phase::Retrain => "retrain",
    }
}

/// Bilevel search followed by retraining on `train + val` with the learned
/// loss parameters frozen.
pub fn autobalance(
    ds: &SplitDataset,
    spec: &ModelSpec,
    init: &LossParams,
    cfg: &BilevelConfig,
    objective: &ValObjective,
    test: Option<&Dataset>,
) -> Result<AutoBalanceOutput> {
    cfg.validate()?;
    spec.validate()?;
    objective.validate()?;
    init.validate()?;
    let mut params = init.clone();
    let mut log = RunLog::default();
    let mut lower = Lower::new(spec, cfg, &ds.train, "search");
    let mut hyper_sampler = Sampler::new(ds.train.len(), cfg.batch_train, rng::stream(cfg.seed, "hyper-batches"));
    let mut val_sampler = Sampler::new(ds.val.len(), cfg.batch_val, rng::stream(cfg.seed, "val-batches"));
    let mut alpha = params.alpha();
    let mask = params.alpha_mask(&cfg.train);
    let mut alpha_state = SgdState::new();
    let ipe = iters_per_epoch(ds.train.len(), cfg.batch_train);
    let mut running = 0.0;
    for it in 0..cfg.t2 {
        let epoch = it / ipe;
        running += lower.step(&params, it, epoch)?;
        if it >= cfg.t1 && (it - cfg.t1).is_multiple_of(cfg.alpha_every_n) {
            let tb = ds.train.subset(&hyper_sampler.next())?;
            let vb = ds.val.subset(&val_sampler.next())?;
            let aug = lower.draws(&tb, &params);
            let hg = hypergradient(spec, &lower.theta, &params, &tb, &aug, &vb, objective, &cfg.neumann)
                .map_err(|e| diverged(epoch, e))?;
            let mut step = hg.zip_map(&mask, |g, m| g * m);
            // decay only what is being trained
            let decay = alpha.zip_map(&mask, |a, m| a * m * cfg.alpha_weight_decay);
            step = step.zip_map(&decay, |g, d| g + d);
            sgd_step(&mut alpha, &step, &mut alpha_state, cfg.eta_alpha, cfg.alpha_momentum, 0.0);
            if !alpha.all_finite() {
                return Err(Error::Divergence {
                    epoch,
                    reason: format!("non-finite hyperparameters after iteration {it}"),
                });
            }
            params = params.with_alpha(&alpha)?;
            if let Some(eps) = params.eps_embed.as_mut() {
                for e in eps.iter_mut() {
                    *e = e.max(0.0);
                }
                alpha = params.alpha();
            }
            debug!("iteration {it}: |hypergradient| = {:.3e}", hg.norm());
        }
        if (it + 1) % ipe == 0 || it + 1 == cfg.t2 {
            let n = (it % ipe + 1) as f64;
            let sets = EvalSets {
                train: &ds.train,
                val: Some((&ds.val, objective)),
                test,
            };
            let rec = record(Phase::Search, epoch, it + 1, spec, &lower.theta, &params, running / n, &sets)?;
            info!(
                "search epoch {epoch}: train err {:.4}, val bal err {:.4}",
                rec.train_err,
                rec.val_err.unwrap_or(f64::NAN)
            );
            log.records.push(rec);
            running = 0.0;
        }
    }
    let theta_search = lower.theta;
    let theta = if cfg.retrain {
        let union = ds.train.concat(&ds.val)?;
        train_fixed(&union, spec, &params, cfg, test, Phase::Retrain, &mut log)?
    } else {
        theta_search.clone()
    };
    let test_report = match test {
        Some(t) => Some(metrics::evaluate(spec, &theta, t)?),
        None => None,
    };
    Ok(AutoBalanceOutput {
        theta_search,
        theta,
        alpha: params,
        log,
        test_report,
    })
}
