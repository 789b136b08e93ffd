//! The parametric cross-entropy family, its dictionary search space, and the
//! validation objectives used to tune it.
//!
//! Per example with logits `f`, the loss is
//! `w_y * log(1 + sum_{k != y} exp(l_k - l_y) * exp(D_k f_k - D_y f_y))`,
//! evaluated as `w_y * (logsumexp(z) - z_y)` with `z = D * f + l`.

use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid, Tape, Var};
use crate::data::{self, AugmentPolicy, Dataset};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::rng::Rng;
use crate::tensor::Tensor;

static EMPTY_CELL_WARNINGS: AtomicUsize = AtomicUsize::new(0);

fn warn_empty(what: &str) {
    let n = EMPTY_CELL_WARNINGS.fetch_add(1, Ordering::Relaxed);
    if n < 5 {
        warn!("{what} is empty in this batch; it contributes 0 to the loss");
    } else if n == 5 {
        warn!("further empty-cell warnings suppressed");
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DictionaryKind {
    Identity,
    Cluster { clusters: usize },
    LaColumn,
    Custom,
}

/// An `R x K'` expansion matrix, `R` being `K` (class form) or `K * G`
/// (group form, row `k * G + g`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    pub kind: DictionaryKind,
    pub matrix: Tensor,
}

impl Dictionary {
    pub fn identity(rows: usize) -> Self {
        let mut m = Tensor::zeros(&[rows, rows]);
        for i in 0..rows {
            m[i * rows + i] = 1.0;
        }
        Self {
            kind: DictionaryKind::Identity,
            matrix: m,
        }
    }

    /// Indicator columns from an explicit assignment of rows to clusters.
    pub fn cluster(assignment: &[usize]) -> Result<Self> {
        let c = assignment.iter().max().map_or(0, |m| m + 1);
        if assignment.is_empty() || (0..c).any(|j| !assignment.contains(&j)) {
            return Err(Error::Config(format!("cluster assignment {assignment:?} leaves a cluster empty")));
        }
        let r = assignment.len();
        let mut m = Tensor::zeros(&[r, c]);
        for (i, &j) in assignment.iter().enumerate() {
            m[i * c + j] = 1.0;
        }
        Ok(Self {
            kind: DictionaryKind::Cluster { clusters: c },
            matrix: m,
        })
    }

    /// Classes sorted by decreasing count (ties by index) and cut into `c`
    /// contiguous clusters of near-equal size.
    pub fn frequency_clusters(counts: &[usize], c: usize) -> Result<Self> {
        let k = counts.len();
        if c == 0 || c > k {
            return Err(Error::Config(format!("cannot form {c} clusters from {k} classes")));
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(counts[i]), i));
        let mut assignment = vec![0; k];
        for (rank, &cls) in order.iter().enumerate() {
            assignment[cls] = rank * c / k;
        }
        Self::cluster(&assignment)
    }

    /// Single column `log pi`; its embedding is the LA temperature `tau`.
    pub fn la_column(priors: &[f64]) -> Result<Self> {
        if priors.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Config("LA dictionary needs positive frequencies".into()));
        }
        Ok(Self {
            kind: DictionaryKind::LaColumn,
            matrix: Tensor::matrix(priors.len(), 1, priors.iter().map(|p| p.ln()).collect()),
        })
    }

    pub fn custom(matrix: Tensor) -> Result<Self> {
        if matrix.shape().len() != 2 || !matrix.all_finite() {
            return Err(Error::Config("custom dictionary must be a finite matrix".into()));
        }
        Ok(Self {
            kind: DictionaryKind::Custom,
            matrix,
        })
    }

    pub fn rows(&self) -> usize {
        self.matrix.dims2().0
    }

    pub fn cols(&self) -> usize {
        self.matrix.dims2().1
    }

    pub fn validate(&self) -> Result<()> {
        let (r, c) = self.matrix.dims2();
        let m = |i: usize, j: usize| self.matrix[i * c + j];
        match &self.kind {
            DictionaryKind::Identity => {
                if r != c || (0..r).any(|i| (0..c).any(|j| m(i, j) != f64::from(u8::from(i == j)))) {
                    return Err(Error::Config("identity dictionary is not an identity".into()));
                }
            }
            DictionaryKind::Cluster { clusters } => {
                let ok = *clusters == c
                    && (0..r).all(|i| {
                        (0..c).all(|j| m(i, j) == 0.0 || m(i, j) == 1.0)
                            && (0..c).filter(|&j| m(i, j) == 1.0).count() == 1
                    })
                    && (0..c).all(|j| (0..r).any(|i| m(i, j) == 1.0));
                if !ok {
                    return Err(Error::Config(
                        "cluster dictionary columns must be disjoint indicators covering every row".into(),
                    ));
                }
            }
            DictionaryKind::LaColumn => {
                if c != 1 {
                    return Err(Error::Config("LA dictionary has a single column".into()));
                }
            }
            DictionaryKind::Custom => {}
        }
        if !self.matrix.all_finite() {
            return Err(Error::Config("dictionary has non-finite entries".into()));
        }
        Ok(())
    }

    /// `D e`.
    pub fn expand(&self, embed: &[f64]) -> Vec<f64> {
        let (r, c) = self.matrix.dims2();
        assert_eq!(embed.len(), c, "embedding length");
        (0..r)
            .map(|i| (0..c).map(|j| self.matrix[i * c + j] * embed[j]).sum())
            .collect()
    }

    /// Least-squares embedding of a target row vector.
    pub fn project(&self, target: &[f64]) -> Vec<f64> {
        let (r, c) = self.matrix.dims2();
        let d = DMatrix::from_row_slice(r, c, self.matrix.data());
        let t = DVector::from_column_slice(target);
        let svd = d.svd(true, true);
        match svd.solve(&t, 1e-12) {
            Ok(e) => e.iter().copied().collect(),
            Err(_) => vec![0.0; c],
        }
    }
}

/// Which `alpha` blocks the upper level updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFlags {
    #[serde(default)]
    pub w: bool,
    #[serde(default = "yes")]
    pub l: bool,
    #[serde(default = "yes")]
    pub delta: bool,
    #[serde(default)]
    pub eps: bool,
}

fn yes() -> bool {
    true
}

impl Default for TrainFlags {
    fn default() -> Self {
        Self {
            w: false,
            l: true,
            delta: true,
            eps: false,
        }
    }
}

/// Hyperparameters `alpha`: embeddings of the weight, additive and raw
/// multiplicative adjustments (and optionally augmentation radii) through a
/// shared dictionary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub w_embed: Vec<f64>,
    pub l_embed: Vec<f64>,
    pub delta_raw_embed: Vec<f64>,
    pub eps_embed: Option<Vec<f64>>,
    pub dictionary: Dictionary,
    /// `Some(G)` for the group form.
    pub num_groups: Option<usize>,
    /// Frequencies the parameters were initialized from.
    #[serde(default)]
    pub priors: Option<Vec<f64>>,
}

/// Effective per-row adjustments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expanded {
    pub w: Vec<f64>,
    pub l: Vec<f64>,
    pub delta: Vec<f64>,
    pub eps: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    /// `w = 1`, `l = 0`, uniform `Delta`.
    Ce,
    /// `w` proportional to `1 / pi`, mean 1.
    BalancedCe,
    /// `w = 1`, `l = log pi`.
    LaInit,
}

impl LossParams {
    pub fn init(kind: InitKind, priors: &[f64], dictionary: Dictionary, with_eps: bool) -> Result<Self> {
        dictionary.validate()?;
        if dictionary.rows() != priors.len() {
            return Err(Error::Config(format!(
                "dictionary has {} rows but {} frequencies were given",
                dictionary.rows(),
                priors.len()
            )));
        }
        if priors.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Config("initialization needs positive frequencies".into()));
        }
        let r = priors.len();
        let (w, l) = match kind {
            InitKind::Ce => (vec![1.0; r], vec![0.0; r]),
            InitKind::BalancedCe => {
                let inv: Vec<f64> = priors.iter().map(|p| 1.0 / p).collect();
                let mean = inv.iter().sum::<f64>() / r as f64;
                (inv.iter().map(|x| x / mean).collect(), vec![0.0; r])
            }
            InitKind::LaInit => (vec![1.0; r], priors.iter().map(|p| p.ln()).collect()),
        };
        let c = dictionary.cols();
        let p = Self {
            w_embed: dictionary.project(&w),
            l_embed: dictionary.project(&l),
            delta_raw_embed: vec![0.0; c],
            eps_embed: with_eps.then(|| vec![0.0; c]),
            dictionary,
            num_groups: None,
            priors: Some(priors.to_vec()),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.dictionary.validate()?;
        let c = self.dictionary.cols();
        let lens_ok = self.w_embed.len() == c
            && self.l_embed.len() == c
            && self.delta_raw_embed.len() == c
            && self.eps_embed.as_ref().is_none_or(|e| e.len() == c);
        if !lens_ok {
            return Err(Error::Config(format!("every embedding must have length {c}")));
        }
        if let Some(g) = self.num_groups {
            if g == 0 || !self.dictionary.rows().is_multiple_of(g) {
                return Err(Error::Config("group form needs K * G dictionary rows".into()));
            }
        }
        let e = self.expand();
        if e.w.iter().any(|&w| !(w >= -1e-12)) {
            return Err(Error::Config("expanded weights must be nonnegative".into()));
        }
        if e.eps.as_ref().is_some_and(|e| e.iter().any(|&x| !(x >= -1e-12))) {
            return Err(Error::Config("expanded augmentation radii must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn num_groups_or_one(&self) -> usize {
        self.num_groups.unwrap_or(1)
    }

    pub fn num_classes(&self) -> usize {
        self.dictionary.rows() / self.num_groups_or_one()
    }

    pub fn expand(&self) -> Expanded {
        let d = &self.dictionary;
        Expanded {
            w: d.expand(&self.w_embed),
            l: d.expand(&self.l_embed),
            delta: d.expand(&self.delta_raw_embed).into_iter().map(sigmoid).collect(),
            eps: self.eps_embed.as_ref().map(|e| d.expand(e)),
        }
    }

    /// Flat `[w' | l' | Delta'_raw | eps'?]`.
    pub fn alpha(&self) -> Tensor {
        let mut a = Vec::new();
        a.extend(&self.w_embed);
        a.extend(&self.l_embed);
        a.extend(&self.delta_raw_embed);
        if let Some(e) = &self.eps_embed {
            a.extend(e);
        }
        Tensor::vector(a)
    }

    pub fn with_alpha(&self, alpha: &Tensor) -> Result<Self> {
        let c = self.dictionary.cols();
        let blocks = 3 + usize::from(self.eps_embed.is_some());
        if alpha.len() != blocks * c {
            return Err(Error::Shape(format!("alpha needs {} values, got {}", blocks * c, alpha.len())));
        }
        let a = alpha.data();
        let mut out = self.clone();
        out.w_embed = a[..c].to_vec();
        out.l_embed = a[c..2 * c].to_vec();
        out.delta_raw_embed = a[2 * c..3 * c].to_vec();
        if out.eps_embed.is_some() {
            out.eps_embed = Some(a[3 * c..].to_vec());
        }
        Ok(out)
    }

    /// 1 where `flags` lets the upper level move the coordinate, else 0.
    pub fn alpha_mask(&self, flags: &TrainFlags) -> Tensor {
        let c = self.dictionary.cols();
        let mut m = Vec::new();
        for on in [flags.w, flags.l, flags.delta] {
            m.extend(std::iter::repeat_n(f64::from(u8::from(on)), c));
        }
        if self.eps_embed.is_some() {
            m.extend(std::iter::repeat_n(f64::from(u8::from(flags.eps)), c));
        }
        Tensor::vector(m)
    }

    /// `(w, l, Delta_eff, eps)` rows as differentiable functions of `alpha`.
    pub fn expand_var<'t>(&self, alpha: Var<'t>) -> ExpandedVar<'t> {
        let tape = alpha.tape();
        let c = self.dictionary.cols();
        let r = self.dictionary.rows();
        let d = tape.constant(self.dictionary.matrix.clone());
        let block = |i: usize| d.matmul(alpha.slice(i * c, c).reshape(&[c, 1])).reshape(&[r]);
        ExpandedVar {
            w: block(0),
            l: block(1),
            delta: block(2).sigmoid(),
            eps: self.eps_embed.as_ref().map(|_| block(3)),
        }
    }
}

pub struct ExpandedVar<'t> {
    pub w: Var<'t>,
    pub l: Var<'t>,
    pub delta: Var<'t>,
    pub eps: Option<Var<'t>>,
}

/// Per-class (or per-cell) parameters of the group form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupLossParams {
    /// `[class][group]`.
    pub w: Vec<Vec<f64>>,
    pub l: Vec<Vec<f64>>,
    pub delta_raw: Vec<Vec<f64>>,
}

impl GroupLossParams {
    pub fn uniform(k: usize, g: usize) -> Self {
        Self {
            w: vec![vec![1.0; g]; k],
            l: vec![vec![0.0; g]; k],
            delta_raw: vec![vec![0.0; g]; k],
        }
    }

    /// Identity-dictionary `LossParams` over the `K * G` cells.
    pub fn to_loss_params(&self) -> Result<LossParams> {
        let k = self.w.len();
        let g = self.w.first().map_or(0, Vec::len);
        let flat = |m: &Vec<Vec<f64>>| -> Result<Vec<f64>> {
            if m.len() != k || m.iter().any(|r| r.len() != g) {
                return Err(Error::Config("group parameters must be K x G".into()));
            }
            Ok(m.iter().flatten().copied().collect())
        };
        let p = LossParams {
            w_embed: flat(&self.w)?,
            l_embed: flat(&self.l)?,
            delta_raw_embed: flat(&self.delta_raw)?,
            eps_embed: None,
            dictionary: Dictionary::identity(k * g),
            num_groups: Some(g),
            priors: None,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Group logit adjustment: `w_kg = 1 / pi_g`, `l_kg = log pi_{k|g}`, uniform
/// `Delta`.
pub fn group_la_params(group_freqs: &[f64], class_given_group: &[Vec<f64>]) -> Result<GroupLossParams> {
    let g = group_freqs.len();
    let k = class_given_group.len();
    if group_freqs.iter().chain(class_given_group.iter().flatten()).any(|&p| !(p > 0.0))
        || class_given_group.iter().any(|r| r.len() != g)
    {
        return Err(Error::Config("group LA needs positive K x G frequencies".into()));
    }
    Ok(GroupLossParams {
        w: vec![group_freqs.iter().map(|p| 1.0 / p).collect(); k],
        l: class_given_group.iter().map(|r| r.iter().map(|p| p.ln()).collect()).collect(),
        delta_raw: vec![vec![0.0; g]; k],
    })
}

/// Direct evaluation of the parametric loss for one example.
pub fn parametric_ce(y: usize, logits: &[f64], w: &[f64], l: &[f64], delta: &[f64]) -> f64 {
    if w[y] == 0.0 {
        return 0.0;
    }
    let z: Vec<f64> = logits.iter().zip(delta).zip(l).map(|((f, d), l)| d * f + l).collect();
    let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    w[y] * (lse - z[y])
}

/// Group form for one example; parameters are raw (`Delta` goes through the
/// sigmoid).
pub fn group_parametric_ce(y: usize, g: usize, logits: &[f64], params: &GroupLossParams) -> f64 {
    let col = |m: &Vec<Vec<f64>>| m.iter().map(|r| r[g]).collect::<Vec<_>>();
    let delta: Vec<f64> = col(&params.delta_raw).into_iter().map(sigmoid).collect();
    parametric_ce(y, logits, &col(&params.w), &col(&params.l), &delta)
}

/// Standard softmax cross-entropy per row, shape `[n]`.
pub fn ce_rows<'t>(logits: Var<'t>, labels: &[usize]) -> Var<'t> {
    let n = labels.len();
    logits.logsumexp_cols().reshape(&[n]) - logits.gather_cols(labels)
}

/// Parametric loss per row given per-row adjustment matrices.
fn adjusted_rows<'t>(logits: Var<'t>, labels: &[usize], w_y: Var<'t>, l: Var<'t>, delta: Var<'t>) -> Var<'t> {
    let n = labels.len();
    let z = delta * logits + l;
    w_y * (z.logsumexp_cols().reshape(&[n]) - z.gather_cols(labels))
}

/// Fixed perturbation draws `u` for one batch; with `m` samples per point the
/// augmented batch is the original stacked `m` times.
#[derive(Clone, Debug)]
pub struct AugDraws {
    pub samples: usize,
    /// `(n * m) x d`, or `None` when nothing is perturbed.
    pub u: Option<Tensor>,
    /// Radii used when `alpha` carries none.
    pub radii: Vec<f64>,
}

impl AugDraws {
    pub fn none(num_classes: usize) -> Self {
        Self {
            samples: 1,
            u: None,
            radii: vec![0.0; num_classes],
        }
    }

    /// Draws for `batch`. Unit-ball directions are drawn whenever the radii
    /// are trainable, so that the loss stays differentiable in them at zero.
    pub fn sample(batch: &Dataset, policy: &AugmentPolicy, trainable: bool, rng: &mut Rng) -> Self {
        if policy.is_identity() && !trainable {
            return Self::none(policy.radii.len());
        }
        let (n, d) = (batch.len(), batch.dim());
        let m = policy.samples_per_point;
        let mut u = Vec::with_capacity(n * m * d);
        for _ in 0..m {
            for _ in 0..n {
                u.extend(data::unit_ball(d, rng));
            }
        }
        Self {
            samples: m,
            u: Some(Tensor::matrix(n * m, d, u)),
            radii: policy.radii.clone(),
        }
    }
}

/// Mean over the batch (and augmentation draws) of the parametric training
/// loss at `alpha`.
pub fn train_loss<'t>(
    spec: &ModelSpec,
    theta: Var<'t>,
    alpha: Var<'t>,
    params: &LossParams,
    batch: &Dataset,
    aug: &AugDraws,
) -> Var<'t> {
    let tape = theta.tape();
    let e = params.expand_var(alpha);
    let k = params.num_classes();
    let g = params.num_groups_or_one();
    let m = aug.samples;
    let n = batch.len();
    let labels: Vec<usize> = (0..m).flat_map(|_| batch.labels().iter().copied()).collect();
    let groups: Vec<usize> = match batch.groups() {
        Some(gr) if g > 1 => (0..m).flat_map(|_| gr.iter().copied()).collect(),
        _ => vec![0; n * m],
    };
    let x = tape.constant(batch.features().clone());
    let x = match &aug.u {
        None => x,
        Some(u) => {
            let d = batch.dim();
            let rows: Vec<Var<'t>> = vec![x; m];
            let xr = if m == 1 { x } else { stack_rows(&rows, n, d) };
            let cell: Rc<[usize]> = labels.iter().zip(&groups).map(|(&y, &gi)| y * g + gi).collect();
            let eps_rows = match e.eps {
                Some(eps) => eps.take(cell),
                None => tape.constant(Tensor::vector(labels.iter().map(|&y| aug.radii[y]).collect())),
            };
            let eps_mat = eps_rows.reshape(&[n * m, 1]).expand_cols(d);
            xr + eps_mat * tape.constant(u.clone())
        }
    };
    let logits = spec.forward(theta, x);
    let nm = n * m;
    let row_idx: Rc<[usize]> = groups
        .iter()
        .flat_map(|&gi| (0..k).map(move |c| c * g + gi))
        .collect();
    let y_idx: Rc<[usize]> = labels.iter().zip(&groups).map(|(&y, &gi)| y * g + gi).collect();
    let l = e.l.take(row_idx.clone()).reshape(&[nm, k]);
    let delta = e.delta.take(row_idx).reshape(&[nm, k]);
    let w_y = e.w.take(y_idx);
    adjusted_rows(logits, &labels, w_y, l, delta).mean()
}

fn stack_rows<'t>(parts: &[Var<'t>], n: usize, d: usize) -> Var<'t> {
    let total = parts.len() * n * d;
    let mut acc = parts[0].reshape(&[n * d]).pad(0, total);
    for (i, p) in parts.iter().enumerate().skip(1) {
        acc = acc + p.reshape(&[n * d]).pad(i * n * d, total);
    }
    acc.reshape(&[parts.len() * n, d])
}

/// Mean CE.
pub fn mean_ce<'t>(logits: Var<'t>, labels: &[usize]) -> Var<'t> {
    ce_rows(logits, labels).mean()
}

/// `sum_i c_i * ce_i` with per-example weights `c_i`.
fn weighted_rows<'t>(rows: Var<'t>, c: Vec<f64>) -> Var<'t> {
    rows.dot(rows.tape().constant(Tensor::vector(c)))
}

/// Mean over classes of the class-conditional mean CE; a class absent from
/// the batch contributes 0.
pub fn balanced_ce<'t>(logits: Var<'t>, labels: &[usize], num_classes: usize) -> Var<'t> {
    let mut counts = vec![0usize; num_classes];
    for &y in labels {
        counts[y] += 1;
    }
    if counts.contains(&0) {
        warn_empty("a class");
    }
    let c = labels
        .iter()
        .map(|&y| 1.0 / (num_classes as f64 * counts[y] as f64))
        .collect();
    weighted_rows(ce_rows(logits, labels), c)
}

/// `sum_i w_{y_i} ce_i / n`.
pub fn weighted_ce<'t>(logits: Var<'t>, labels: &[usize], w: &[f64]) -> Var<'t> {
    let n = labels.len() as f64;
    weighted_rows(ce_rows(logits, labels), labels.iter().map(|&y| w[y] / n).collect())
}

fn cell_means<'t>(logits: Var<'t>, labels: &[usize], groups: &[usize], k: usize, g: usize) -> Vec<Option<Var<'t>>> {
    let mut counts = vec![0usize; k * g];
    for (&y, &gi) in labels.iter().zip(groups) {
        counts[y * g + gi] += 1;
    }
    let rows = ce_rows(logits, labels);
    let c: Vec<f64> = labels
        .iter()
        .zip(groups)
        .map(|(&y, &gi)| 1.0 / counts[y * g + gi] as f64)
        .collect();
    let cell: Rc<[usize]> = labels.iter().zip(groups).map(|(&y, &gi)| y * g + gi).collect();
    let sums = (rows * rows.tape().constant(Tensor::vector(c))).scatter_add(cell, k * g);
    (0..k * g)
        .map(|i| {
            if counts[i] == 0 {
                warn_empty(&format!("(class, group) cell ({}, {})", i / g, i % g));
                None
            } else {
                Some(sums.slice(i, 1).reshape(&[]))
            }
        })
        .collect()
}

/// Mean over `(class, group)` cells of the cell-conditional mean CE.
pub fn group_balanced_ce<'t>(logits: Var<'t>, labels: &[usize], groups: &[usize], k: usize, g: usize) -> Var<'t> {
    let n = labels.len();
    let mut counts = vec![0usize; k * g];
    for (&y, &gi) in labels.iter().zip(groups) {
        counts[y * g + gi] += 1;
    }
    if counts.contains(&0) {
        warn_empty("a (class, group) cell");
    }
    let c = (0..n)
        .map(|i| 1.0 / ((k * g) as f64 * counts[labels[i] * g + groups[i]] as f64))
        .collect();
    weighted_rows(ce_rows(logits, labels), c)
}

/// `|CE_{+,1} - CE_{+,2}| + |CE_{-,1} - CE_{-,2}|` for binary classes and
/// groups; an empty cell counts as CE 0.
pub fn deo_surrogate_ce<'t>(logits: Var<'t>, labels: &[usize], groups: &[usize]) -> Var<'t> {
    let tape = logits.tape();
    let cells = cell_means(logits, labels, groups, 2, 2);
    let get = |i: usize| cells[i].unwrap_or_else(|| tape.scalar(0.0));
    (get(0) - get(1)).abs() + (get(2) - get(3)).abs()
}

/// Validation objective `L_fair = (1 - lambda) * CE + lambda * target`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "target")]
pub enum ValObjective {
    Balanced { lambda: f64 },
    GroupBalanced { lambda: f64 },
    Deo { lambda: f64 },
}

impl ValObjective {
    pub fn lambda(&self) -> f64 {
        match *self {
            Self::Balanced { lambda } | Self::GroupBalanced { lambda } | Self::Deo { lambda } => lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.lambda();
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::Config(format!("lambda_val must be in [0,1], got {l}")));
        }
        Ok(())
    }

    pub fn loss<'t>(&self, logits: Var<'t>, batch: &Dataset) -> Result<Var<'t>> {
        let labels = batch.labels();
        let lambda = self.lambda();
        let ce = mean_ce(logits, labels);
        let groups = || {
            batch
                .groups()
                .zip(batch.num_groups())
                .ok_or_else(|| Error::Config("this validation objective needs group labels".into()))
        };
        let target = match self {
            Self::Balanced { .. } => balanced_ce(logits, labels, batch.num_classes()),
            Self::GroupBalanced { .. } => {
                let (gr, g) = groups()?;
                group_balanced_ce(logits, labels, gr, batch.num_classes(), g)
            }
            Self::Deo { .. } => {
                let (gr, g) = groups()?;
                if batch.num_classes() != 2 || g != 2 {
                    return Err(Error::Config("DEO needs two classes and two groups".into()));
                }
                deo_surrogate_ce(logits, labels, gr)
            }
        };
        Ok(ce.scale(1.0 - lambda) + target.scale(lambda))
    }
}

/// Value of a validation objective at fixed parameters, off-tape.
pub fn objective_value(obj: &ValObjective, spec: &ModelSpec, theta: &Tensor, batch: &Dataset) -> Result<f64> {
    let tape = Tape::new();
    let th = tape.constant(theta.clone());
    let logits = spec.forward(th, tape.constant(batch.features().clone()));
    let l = obj.loss(logits, batch)?;
    tape.value_of(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln2() -> f64 {
        2f64.ln()
    }

    #[test]
    fn dictionary_expansions() {
        let id = Dictionary::identity(3);
        assert_eq!(id.expand(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        let cl = Dictionary::cluster(&[0, 0, 1, 1]).unwrap();
        assert_eq!(cl.expand(&[0.3, -1.0]), vec![0.3, 0.3, -1.0, -1.0]);
        let la = Dictionary::la_column(&[0.9, 0.1]).unwrap();
        let l = la.expand(&[1.0]);
        assert!((l[0] - (-0.105_360_515_657_826_3)).abs() < 1e-12);
        assert!((l[1] + std::f64::consts::LN_10).abs() < 1e-12);
    }

    #[test]
    fn frequency_clusters_group_similar_counts() {
        let d = Dictionary::frequency_clusters(&[100, 5, 60, 10], 2).unwrap();
        // ranks: 0 (100), 2 (60) | 3 (10), 1 (5)
        assert_eq!(d.expand(&[1.0, 2.0]), vec![1.0, 2.0, 1.0, 2.0]);
        d.validate().unwrap();
    }

    #[test]
    fn parametric_ce_examples() {
        let v = parametric_ce(0, &[0.0, 0.0], &[1.0, 1.0], &[0.0, 0.0], &[1.0, 1.0]);
        assert!((v - ln2()).abs() < 1e-15);
        // "y = 1" in one-based labels
        let v = parametric_ce(0, &[1.0, 0.0], &[2.0, 1.0], &[ln2(), 0.0], &[1.0, 1.0]);
        assert!((v - 0.337_695_246_996_611_5).abs() < 1e-15);
        let v = parametric_ce(1, &[5.0, -3.0], &[1.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn group_la_examples() {
        let p = group_la_params(&[0.8, 0.2], &[vec![0.9, 0.5], vec![0.1, 0.5]]).unwrap();
        assert!((p.w[0][0] - 1.25).abs() < 1e-12 && (p.w[0][1] - 5.0).abs() < 1e-12);
        assert!((p.l[0][0] - 0.9f64.ln()).abs() < 1e-15);
        assert!((p.l[1][0] - 0.1f64.ln()).abs() < 1e-15);
        assert!(group_la_params(&[1.0, 0.0], &[vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn consistent_inits() {
        let pri = [0.75, 0.25];
        let b = LossParams::init(InitKind::BalancedCe, &pri, Dictionary::identity(2), false).unwrap();
        let e = b.expand();
        assert!((e.w[0] - 0.5).abs() < 1e-12 && (e.w[1] - 1.5).abs() < 1e-12);
        assert_eq!(e.delta, vec![0.5, 0.5]);
        let la = LossParams::init(InitKind::LaInit, &pri, Dictionary::identity(2), true).unwrap();
        let e = la.expand();
        assert!((e.l[1] - 0.25f64.ln()).abs() < 1e-12);
        assert_eq!(la.alpha().len(), 8);
        let back = la.with_alpha(&la.alpha()).unwrap();
        assert_eq!(back, la);
    }

    #[test]
    fn train_loss_at_symmetric_point_is_ln2() {
        let ds = Dataset::new(Tensor::matrix(1, 1, vec![0.0]), vec![0], None, 2, None).unwrap();
        let spec = ModelSpec::linear(1, 2);
        let p = LossParams::init(InitKind::Ce, &[0.5, 0.5], Dictionary::identity(2), false).unwrap();
        let tape = Tape::new();
        let th = tape.leaf(Tensor::zeros(&[spec.num_params()]));
        let al = tape.leaf(p.alpha());
        let v = train_loss(&spec, th, al, &p, &ds, &AugDraws::none(2));
        assert!((v.item() - ln2()).abs() < 1e-15);
    }

    #[test]
    fn deo_surrogate_arithmetic() {
        let tape = Tape::new();
        // rows: logits giving CE ln2 everywhere except one row
        let logits = tape.leaf(Tensor::matrix(4, 2, vec![0.0; 8]));
        let labels = [0, 0, 1, 1];
        let groups = [0, 1, 0, 1];
        let v = deo_surrogate_ce(logits, &labels, &groups);
        assert!(v.item().abs() < 1e-15);
        let bal = balanced_ce(logits, &labels, 2);
        assert!((bal.item() - ln2()).abs() < 1e-15);
    }
}
