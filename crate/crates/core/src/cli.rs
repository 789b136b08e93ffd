//! Config-driven experiment runner behind the `lossforge` binary.
//!
//! A run directory `<out>/<name>-seed<N>/` holds `alpha.json`,
//! `runlog.jsonl`, `metrics.csv` and a `meta.json` with timings. Everything
//! except `meta.json` is a pure function of the config and the seed.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bilevel::{self, BilevelConfig, Phase, RunLog};
use crate::data::{self, Dataset, MixtureSpec, SpuriousSpec, SplitDataset};
use crate::error::{Error, Result};
use crate::losses::{self, Dictionary, GroupLossParams, InitKind, LossParams, TrainFlags, ValObjective};
use crate::metrics::{self, MetricsReport, ParetoPoint};
use crate::model::{ModelKind, ModelSpec};
use crate::rng;
use crate::verify::{self, Check};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Root seed; `--seed` overrides it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    pub data: DataConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub loss: LossConfig,
    pub bilevel: BilevelConfig,
    #[serde(default = "default_objective")]
    pub objective: ValObjective,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_objective() -> ValObjective {
    ValObjective::Balanced { lambda: 1.0 }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Bilevel search over the loss, then retraining.
    #[default]
    Autobalance,
    /// Plain cross-entropy on train + val.
    BaselineCe,
    /// Logit adjustment `l = log pi` on train + val.
    BaselineLa,
    /// The objective section used directly as the training loss on train + val.
    ObjectiveLoss,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_split")]
    pub split: f64,
    pub generator: Generator,
}

fn default_split() -> f64 {
    0.8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum Generator {
    /// `classes` Gaussian classes of nominal size `per_class`, thinned to the
    /// exponential profile with imbalance `rho`.
    LongTail {
        classes: usize,
        per_class: usize,
        rho: f64,
        mixture: MixtureSpec,
        test_per_class: usize,
    },
    /// Two classes by two groups with cell fractions `[class][group]`.
    Groups {
        fractions: Vec<Vec<f64>>,
        n: usize,
        features: SpuriousSpec,
        test_per_cell: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default)]
    pub hidden_sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    #[serde(default = "default_init")]
    pub init: InitKind,
    #[serde(default)]
    pub dictionary: DictionaryConfig,
    #[serde(default)]
    pub train: TrainFlags,
}

fn default_init() -> InitKind {
    InitKind::LaInit
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            init: default_init(),
            dictionary: DictionaryConfig::default(),
            train: TrainFlags::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum DictionaryConfig {
    /// One parameter per class (per cell for group data).
    #[default]
    Identity,
    /// Classes sorted by training frequency and cut into `clusters` bands.
    FrequencyClusters { clusters: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<SweepMethod>,
    /// Defaults to the root seed alone.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

fn default_methods() -> Vec<SweepMethod> {
    vec![SweepMethod::Autobalance, SweepMethod::ObjectiveLoss]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMethod {
    Autobalance,
    ObjectiveLoss,
}

impl SweepMethod {
    fn mode(self) -> Mode {
        match self {
            Self::Autobalance => Mode::Autobalance,
            Self::ObjectiveLoss => Mode::ObjectiveLoss,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Self::Autobalance => "autobalance",
            Self::ObjectiveLoss => "objective-loss",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("runs") }
    }
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the path ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("name {:?} must be a plain file name", self.name));
        }
        if !(self.data.split > 0.0 && self.data.split < 1.0) {
            return bad(format!("data.split must be in (0, 1), got {}", self.data.split));
        }
        if self.bilevel.train != TrainFlags::default() {
            return bad("train flags belong in [loss.train], not [bilevel]".into());
        }
        match &self.data.generator {
            Generator::LongTail { classes, rho, .. } => {
                if *classes < 2 || !(*rho >= 1.0) {
                    return bad("long-tail data needs at least two classes and rho >= 1".into());
                }
                if matches!(self.objective, ValObjective::Deo { .. } | ValObjective::GroupBalanced { .. }) {
                    return bad("group objectives need group data".into());
                }
            }
            Generator::Groups { fractions, .. } => {
                if fractions.len() != 2 || fractions.iter().any(|r| r.len() != 2) {
                    return bad("group data is two classes by two groups".into());
                }
            }
        }
        if let DictionaryConfig::FrequencyClusters { clusters } = self.loss.dictionary {
            if clusters == 0 {
                return bad("clusters must be positive".into());
            }
        }
        if let Some(s) = &self.sweep {
            if s.lambdas.is_empty() || s.methods.is_empty() {
                return bad("sweep needs lambdas and methods".into());
            }
            if s.lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
                return bad("sweep lambdas must lie in [0, 1]".into());
            }
        }
        self.objective.validate()?;
        let mut b = self.bilevel.clone();
        b.train = self.loss.train;
        b.validate()
    }

    fn bilevel_for(&self, seed: u64) -> BilevelConfig {
        BilevelConfig {
            seed,
            train: self.loss.train,
            ..self.bilevel.clone()
        }
    }

    pub fn run_dir(&self, out: &Path, seed: u64) -> PathBuf {
        out.join(format!("{}-seed{seed}", self.name))
    }
}

/// Generated data for one seed.
pub struct Generated {
    pub full: Dataset,
    pub split: SplitDataset,
    pub test: Dataset,
    pub generator: serde_json::Value,
}

pub fn generate(cfg: &ExperimentConfig, seed: u64) -> Result<Generated> {
    let (full, test, generator) = match &cfg.data.generator {
        Generator::LongTail {
            classes,
            per_class,
            rho,
            mixture,
            test_per_class,
        } => {
            let (full, profile) = data::make_longtail(&vec![*per_class; *classes], *rho, mixture, seed)?;
            let test = data::sample_mixture(&vec![*test_per_class; *classes], mixture, &mut rng::stream(seed, "test"), *classes)?;
            let mut g = serde_json::to_value(&cfg.data.generator)?;
            g["mu"] = serde_json::json!(profile.mu);
            g["sizes"] = serde_json::json!(profile.sizes);
            (full, test, g)
        }
        Generator::Groups {
            fractions,
            n,
            features,
            test_per_cell,
        } => {
            let full = data::make_group_dataset(fractions, *n, features, seed)?;
            let sizes = vec![vec![*test_per_cell; 2]; 2];
            let test = data::sample_cells(&sizes, features, &mut rng::stream(seed, "test"))?;
            (full, test, serde_json::to_value(&cfg.data.generator)?)
        }
    };
    let split = data::split(&full, cfg.data.split, seed)?;
    Ok(Generated {
        full,
        split,
        test,
        generator,
    })
}

fn model_spec(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ModelSpec> {
    let spec = match cfg.model.kind {
        ModelKind::Linear => ModelSpec::linear(ds.dim(), ds.num_classes()),
        ModelKind::Mlp => ModelSpec::mlp(ds.dim(), &cfg.model.hidden_sizes, ds.num_classes()),
    };
    spec.validate()?;
    Ok(spec)
}

/// Initial loss parameters: class form for long-tail data, `(class, group)`
/// cell form for group data.
pub fn initial_params(cfg: &ExperimentConfig, init: InitKind, train: &Dataset) -> Result<LossParams> {
    let k = train.num_classes();
    match (train.num_groups(), train.group_counts()) {
        (Some(g), Some(counts)) => {
            let n = train.len() as f64;
            let cell: Vec<f64> = counts.iter().flatten().map(|&c| c.max(1) as f64 / n).collect();
            let params = match init {
                InitKind::Ce => GroupLossParams::uniform(k, g),
                InitKind::LaInit | InitKind::BalancedCe => {
                    let group_freqs: Vec<f64> = (0..g).map(|j| (0..k).map(|c| cell[c * g + j]).sum()).collect();
                    let cond: Vec<Vec<f64>> = (0..k)
                        .map(|c| (0..g).map(|j| cell[c * g + j] / group_freqs[j]).collect())
                        .collect();
                    let mut p = losses::group_la_params(&group_freqs, &cond)?;
                    if init == InitKind::BalancedCe {
                        p.l = vec![vec![0.0; g]; k];
                    } else {
                        p.w = vec![vec![1.0; g]; k];
                    }
                    p
                }
            };
            if cfg.loss.dictionary != DictionaryConfig::Identity {
                return Err(Error::Config("group data supports only the identity dictionary".into()));
            }
            params.to_loss_params()
        }
        _ => {
            let priors = train.class_priors();
            let dict = match cfg.loss.dictionary {
                DictionaryConfig::Identity => Dictionary::identity(k),
                DictionaryConfig::FrequencyClusters { clusters } => {
                    Dictionary::frequency_clusters(train.class_counts(), clusters)?
                }
            };
            LossParams::init(init, &priors, dict, cfg.loss.train.eps)
        }
    }
}

/// Everything a single run produces.
pub struct RunOutcome {
    pub alpha: LossParams,
    pub log: RunLog,
    pub test: MetricsReport,
    pub val: MetricsReport,
    pub train: MetricsReport,
}

/// Executes one run in memory.
pub fn execute(cfg: &ExperimentConfig, mode: Mode, objective: &ValObjective, seed: u64) -> Result<RunOutcome> {
    let gen = generate(cfg, seed)?;
    let spec = model_spec(cfg, &gen.full)?;
    let bcfg = cfg.bilevel_for(seed);
    let split = &gen.split;
    let union = || split.train.concat(&split.val);
    let mut log = RunLog::default();
    let (theta, alpha) = match mode {
        Mode::Autobalance => {
            let init = initial_params(cfg, cfg.loss.init, &split.train)?;
            let out = bilevel::autobalance(split, &spec, &init, &bcfg, objective, Some(&gen.test))?;
            log = out.log;
            (out.theta, out.alpha)
        }
        Mode::BaselineCe | Mode::BaselineLa => {
            let kind = if mode == Mode::BaselineCe { InitKind::Ce } else { InitKind::LaInit };
            let params = initial_params(cfg, kind, &split.train)?;
            let theta = bilevel::train_fixed(&union()?, &spec, &params, &bcfg, Some(&gen.test), Phase::Retrain, &mut log)?;
            (theta, params)
        }
        Mode::ObjectiveLoss => {
            let params = initial_params(cfg, InitKind::Ce, &split.train)?;
            let theta = bilevel::train_objective(&union()?, &spec, objective, &bcfg, Some(&gen.test), &mut log)?;
            (theta, params)
        }
    };
    Ok(RunOutcome {
        test: metrics::evaluate(&spec, &theta, &gen.test)?,
        val: metrics::evaluate(&spec, &theta, &split.val)?,
        train: metrics::evaluate(&spec, &theta, &split.train)?,
        alpha,
        log,
    })
}

/// Long-format `split,metric,value` rows.
pub fn metrics_csv(rows: &[(&str, &MetricsReport)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["split", "metric", "value"])?;
    for (split, r) in rows {
        let mut put = |m: String, v: f64| w.write_record([split.to_string(), m, data::fmt_f64(v)]);
        put("std_err".into(), r.std_err)?;
        put("balanced_err".into(), r.balanced_err)?;
        for (k, e) in r.per_class_err.iter().enumerate() {
            put(format!("class_err_{k}"), *e)?;
        }
        if let Some(v) = r.group_balanced_err {
            put("group_balanced_err".into(), v)?;
        }
        if let Some(v) = r.deo {
            put("deo".into(), v)?;
        }
        if let Some(v) = r.worst_cell_err {
            put("worst_cell_err".into(), v)?;
        }
        if let Some(cells) = &r.per_cell_err {
            for (k, row) in cells.iter().enumerate() {
                for (g, e) in row.iter().enumerate() {
                    put(format!("cell_err_{k}_{g}"), *e)?;
                }
            }
        }
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
        .map_err(|e| Error::Config(e.to_string()))
}

fn write_meta(dir: &Path, cfg: &ExperimentConfig, seed: u64, started: Instant, extra: serde_json::Value) -> Result<()> {
    let unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = serde_json::json!({
        "config": cfg,
        "seed": seed,
        "finished_unix": unix,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
        "version": env!("CARGO_PKG_VERSION"),
        "extra": extra,
    });
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

/// Writes the train/val split and the test set with JSON sidecars.
pub fn cmd_gen_data(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<PathBuf> {
    let gen = generate(cfg, seed)?;
    let dir = cfg.run_dir(out, seed).join("data");
    for (stem, ds) in [("full", &gen.full), ("train", &gen.split.train), ("val", &gen.split.val), ("test", &gen.test)] {
        let stream = if stem == "test" { "test" } else { "data" };
        let mut g = gen.generator.clone();
        g["stream"] = serde_json::json!(stream);
        data::save(ds, &data::meta_for(ds, g, seed), &dir, stem)?;
    }
    info!("wrote {}", dir.display());
    Ok(dir)
}

/// Runs the configured mode and writes the run directory.
pub fn cmd_run(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<PathBuf> {
    let started = Instant::now();
    let outcome = execute(cfg, cfg.mode, &cfg.objective, seed)?;
    let dir = cfg.run_dir(out, seed);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("alpha.json"), serde_json::to_string_pretty(&outcome.alpha)? + "\n")?;
    std::fs::write(dir.join("runlog.jsonl"), outcome.log.to_jsonl()?)?;
    let csv = metrics_csv(&[("train", &outcome.train), ("val", &outcome.val), ("test", &outcome.test)])?;
    std::fs::write(dir.join("metrics.csv"), csv)?;
    write_meta(&dir, cfg, seed, started, serde_json::json!({"mode": cfg.mode}))?;
    info!(
        "{}: test std err {:.4}, balanced err {:.4}",
        dir.display(),
        outcome.test.std_err,
        outcome.test.balanced_err
    );
    Ok(dir)
}

/// One `(method, lambda)` row of `pareto.csv`, averaged over seeds that did
/// not diverge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub lambda: f64,
    pub std_err: f64,
    pub fairness: f64,
    pub balanced_err: f64,
    pub seeds: usize,
    pub diverged: usize,
    pub frontier: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub reference: (f64, f64),
    /// `(method, hypervolume)` against `reference`.
    pub hypervolume: Vec<(String, f64)>,
}

fn objective_with(obj: &ValObjective, lambda: f64) -> ValObjective {
    match obj {
        ValObjective::Balanced { .. } => ValObjective::Balanced { lambda },
        ValObjective::GroupBalanced { .. } => ValObjective::GroupBalanced { lambda },
        ValObjective::Deo { .. } => ValObjective::Deo { lambda },
    }
}

/// Fairness coordinate of a Pareto point: DEO on group data, balanced error
/// otherwise.
fn fairness(r: &MetricsReport) -> f64 {
    r.deo.unwrap_or(r.balanced_err)
}

/// Runs every `(method, lambda, seed)` on `jobs` threads and reduces the
/// results in that order.
pub fn sweep(cfg: &ExperimentConfig, seed: u64, jobs: usize) -> Result<SweepSummary> {
    let sc = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a [sweep] section".into()))?;
    let seeds = if sc.seeds.is_empty() { vec![seed] } else { sc.seeds.clone() };
    let mut tasks = Vec::new();
    for &m in &sc.methods {
        for &lambda in &sc.lambdas {
            for &s in &seeds {
                tasks.push((m, lambda, s));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<Option<MetricsReport>>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(m, lambda, s)| match execute(cfg, m.mode(), &objective_with(&cfg.objective, lambda), s) {
                Ok(o) => Ok(Some(o.test)),
                Err(Error::Divergence { epoch, reason }) => {
                    warn!("{} lambda {lambda} seed {s} diverged at epoch {epoch}: {reason}", m.tag());
                    Ok(None)
                }
                Err(e) => Err(e),
            })
            .collect()
    });
    let mut rows = Vec::new();
    let per = seeds.len();
    for (chunk, res) in tasks.chunks(per).zip(results.chunks(per)) {
        let (m, lambda, _) = chunk[0];
        let mut ok = Vec::new();
        for r in res {
            match r {
                Ok(Some(rep)) => ok.push(rep.clone()),
                Ok(None) => {}
                Err(e) => return Err(Error::Config(format!("sweep run failed: {e}"))),
            }
        }
        let mean = |f: &dyn Fn(&MetricsReport) -> f64| ok.iter().map(f).sum::<f64>() / ok.len().max(1) as f64;
        rows.push(SweepRow {
            method: m.tag().into(),
            lambda,
            std_err: mean(&|r| r.std_err),
            fairness: mean(&|r| fairness(r)),
            balanced_err: mean(&|r| r.balanced_err),
            seeds: ok.len(),
            diverged: per - ok.len(),
            frontier: false,
        });
    }
    let points: Vec<ParetoPoint> = rows
        .iter()
        .filter(|r| r.seeds > 0)
        .map(|r| ParetoPoint {
            lambda: r.lambda,
            std_err: r.std_err,
            fairness_value: r.fairness,
            tag: r.method.clone(),
        })
        .collect();
    let flags = metrics::frontier_flags(&points);
    for (row, flag) in rows.iter_mut().filter(|r| r.seeds > 0).zip(flags) {
        row.frontier = flag;
    }
    let by_method: Vec<(String, Vec<ParetoPoint>)> = sc
        .methods
        .iter()
        .map(|m| (m.tag().to_string(), points.iter().filter(|p| p.tag == m.tag()).cloned().collect()))
        .collect();
    let reference = metrics::worst_corner(by_method.iter().map(|(_, p)| p.as_slice()));
    let hypervolume = by_method
        .iter()
        .map(|(m, p)| (m.clone(), metrics::hypervolume(p, reference)))
        .collect();
    Ok(SweepSummary {
        rows,
        reference,
        hypervolume,
    })
}

pub fn cmd_sweep(cfg: &ExperimentConfig, seed: u64, out: &Path, jobs: usize) -> Result<PathBuf> {
    let started = Instant::now();
    let summary = sweep(cfg, seed, jobs)?;
    let dir = out.join(format!("{}-sweep-seed{seed}", cfg.name));
    std::fs::create_dir_all(&dir)?;
    let mut w = csv::Writer::from_path(dir.join("pareto.csv"))?;
    w.write_record(["method", "lambda", "std_err", "fairness", "balanced_err", "seeds", "diverged", "frontier"])?;
    for r in &summary.rows {
        w.write_record([
            r.method.clone(),
            data::fmt_f64(r.lambda),
            data::fmt_f64(r.std_err),
            data::fmt_f64(r.fairness),
            data::fmt_f64(r.balanced_err),
            r.seeds.to_string(),
            r.diverged.to_string(),
            r.frontier.to_string(),
        ])?;
    }
    w.flush()?;
    let extra = serde_json::json!({"reference": summary.reference, "hypervolume": summary.hypervolume});
    write_meta(&dir, cfg, seed, started, extra)?;
    Ok(dir)
}

/// Runs the selected checks, writes `verify.json`, and returns the verdict.
pub fn cmd_verify(which: Check, seed: u64, out: &Path) -> Result<verify::Verdict> {
    let v = verify::run(which, seed)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("verify.json"), serde_json::to_string_pretty(&v)? + "\n")?;
    Ok(v)
}

/// Plain-text summary of a run or sweep directory.
pub fn cmd_report(dir: &Path) -> Result<String> {
    let mut s = String::new();
    let pareto = dir.join("pareto.csv");
    let metrics = dir.join("metrics.csv");
    if pareto.exists() {
        let rows: Vec<SweepRow> = csv::Reader::from_path(&pareto)?.deserialize().collect::<std::result::Result<_, _>>()?;
        s.push_str(&format!("{:<16} {:>7} {:>9} {:>9} {:>9}  frontier\n", "method", "lambda", "std_err", "fairness", "bal_err"));
        for r in rows {
            s.push_str(&format!(
                "{:<16} {:>7.3} {:>9.4} {:>9.4} {:>9.4}  {}\n",
                r.method,
                r.lambda,
                r.std_err,
                r.fairness,
                r.balanced_err,
                if r.frontier { "*" } else { "" }
            ));
        }
    } else if metrics.exists() {
        let mut rd = csv::Reader::from_path(&metrics)?;
        for rec in rd.records() {
            let rec = rec?;
            if rec[0] == *"test" {
                let v: f64 = rec[2].parse().map_err(|_| Error::Config("bad metrics.csv value".into()))?;
                s.push_str(&format!("{:<20} {v:.4}\n", &rec[1]));
            }
        }
        let alpha: LossParams = serde_json::from_str(&std::fs::read_to_string(dir.join("alpha.json"))?)?;
        let e = alpha.expand();
        s.push_str("row        w        l    delta\n");
        for i in 0..e.l.len() {
            s.push_str(&format!("{i:>3} {:>8.4} {:>8.4} {:>8.4}\n", e.w[i], e.l[i], e.delta[i]));
        }
    } else {
        return Err(Error::Config(format!("{} holds neither metrics.csv nor pareto.csv", dir.display())));
    }
    Ok(s)
}

#[derive(Debug, Parser)]
#[command(name = "lossforge", about = "Bilevel loss design for imbalanced classification", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the configured dataset and write CSV files with JSON sidecars.
    GenData(Common),
    /// Run one experiment.
    Run(Common),
    /// Sweep lambda_val over methods and seeds and write pareto.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run theory checks; exits 4 if any fails.
    Verify {
        #[arg(value_enum, default_value = "all")]
        which: Check,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Summarize a run or sweep directory.
    Report { dir: PathBuf },
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        _ => 1,
    }
}

fn resolve(c: &Common) -> Result<(ExperimentConfig, u64, PathBuf)> {
    let cfg = ExperimentConfig::load(&c.config)?;
    let seed = c.seed.unwrap_or(cfg.seed);
    let out = c.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, seed, out))
}

/// Dispatches a parsed command line; returns the process exit code.
pub fn dispatch(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::GenData(c) => resolve(&c).and_then(|(cfg, s, o)| cmd_gen_data(&cfg, s, &o)).map(|d| {
            println!("{}", d.display());
            0
        }),
        Command::Run(c) => resolve(&c).and_then(|(cfg, s, o)| cmd_run(&cfg, s, &o)).map(|d| {
            println!("{}", d.display());
            0
        }),
        Command::Sweep { common, jobs } => resolve(&common)
            .and_then(|(cfg, s, o)| cmd_sweep(&cfg, s, &o, jobs))
            .map(|d| {
                println!("{}", d.display());
                0
            }),
        Command::Verify { which, seed, out } => cmd_verify(which, seed, &out).and_then(|v| {
            println!("{}", serde_json::to_string_pretty(&v)?);
            Ok(if v.pass { 0 } else { EXIT_VERIFY })
        }),
        Command::Report { dir } => cmd_report(&dir).map(|s| {
            print!("{s}");
            0
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
