//! Synthetic imbalanced datasets, stratified splitting, per-class spherical
//! augmentation, and the CSV + JSON sidecar on-disk format.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::tensor::Tensor;

/// Labelled examples with optional group membership.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Tensor,
    labels: Vec<usize>,
    groups: Option<Vec<usize>>,
    num_classes: usize,
    num_groups: Option<usize>,
    class_counts: Vec<usize>,
    group_counts: Option<Vec<Vec<usize>>>,
}

impl Dataset {
    pub fn new(
        features: Tensor,
        labels: Vec<usize>,
        groups: Option<Vec<usize>>,
        num_classes: usize,
        num_groups: Option<usize>,
    ) -> Result<Self> {
        let (n, _) = features.dims2();
        if features.shape().len() != 2 {
            return Err(Error::Shape("features must be an n x d matrix".into()));
        }
        if n == 0 || labels.len() != n {
            return Err(Error::Config(format!(
                "need n >= 1 labels matching {n} feature rows, got {}",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Config(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        let mut class_counts = vec![0; num_classes];
        for &y in &labels {
            class_counts[y] += 1;
        }
        let group_counts = match (&groups, num_groups) {
            (None, None) => None,
            (Some(g), Some(ng)) => {
                if g.len() != n {
                    return Err(Error::Config("group vector length mismatch".into()));
                }
                let mut counts = vec![vec![0; ng]; num_classes];
                for (&y, &gi) in labels.iter().zip(g) {
                    if gi >= ng {
                        return Err(Error::Config(format!(
                            "group {gi} out of range for {ng} groups"
                        )));
                    }
                    counts[y][gi] += 1;
                }
                Some(counts)
            }
            _ => {
                return Err(Error::Config(
                    "groups and num_groups must be given together".into(),
                ))
            }
        };
        Ok(Self {
            features,
            labels,
            groups,
            num_classes,
            num_groups,
            class_counts,
            group_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.dims2().1
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn groups(&self) -> Option<&[usize]> {
        self.groups.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_groups(&self) -> Option<usize> {
        self.num_groups
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    /// `[class][group]` counts.
    pub fn group_counts(&self) -> Option<&[Vec<usize>]> {
        self.group_counts.as_deref()
    }

    /// Empirical class frequencies `pi_k`.
    pub fn class_priors(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.class_counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Stratum id used for splitting: the class, or the `(class, group)` cell.
    fn stratum(&self, i: usize) -> usize {
        match (&self.groups, self.num_groups) {
            (Some(g), Some(ng)) => self.labels[i] * ng + g[i],
            _ => self.labels[i],
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Rows `idx` in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut feats = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            feats.extend_from_slice(self.row(i));
        }
        Self::new(
            Tensor::matrix(idx.len(), d, feats),
            idx.iter().map(|&i| self.labels[i]).collect(),
            self.groups
                .as_ref()
                .map(|g| idx.iter().map(|&i| g[i]).collect()),
            self.num_classes,
            self.num_groups,
        )
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim()
            || self.num_classes != other.num_classes
            || self.num_groups != other.num_groups
        {
            return Err(Error::Config("cannot concatenate incompatible datasets".into()));
        }
        let mut feats = self.features.data().to_vec();
        feats.extend_from_slice(other.features.data());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let groups = match (&self.groups, &other.groups) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Self::new(
            Tensor::matrix(labels.len(), self.dim(), feats),
            labels,
            groups,
            self.num_classes,
            self.num_groups,
        )
    }
}

/// Class-conditional isotropic Gaussian mixture.
///
/// Class `k` has mean `spacing * e_k` when `dim >= K` (vertices of a scaled
/// simplex) and otherwise `spacing * (cos, sin)(2 pi k / K)` in the first two
/// coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub dim: usize,
    pub spacing: f64,
    pub noise_std: f64,
}

impl MixtureSpec {
    pub fn mean(&self, k: usize, num_classes: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        if self.dim >= num_classes {
            m[k] = self.spacing;
        } else {
            let a = 2.0 * std::f64::consts::PI * k as f64 / num_classes as f64;
            m[0] = self.spacing * a.cos();
            if self.dim > 1 {
                m[1] = self.spacing * a.sin();
            }
        }
        m
    }

    /// `n` draws from class `k`.
    pub fn sample(&self, k: usize, num_classes: usize, n: usize, rng: &mut Rng) -> Vec<f64> {
        let mean = self.mean(k, num_classes);
        let mut out = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            for &m in &mean {
                let z: f64 = StandardNormal.sample(rng);
                out.push(m + self.noise_std * z);
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 || !(self.noise_std >= 0.0) || !self.spacing.is_finite() {
            return Err(Error::Config(format!("invalid mixture spec {self:?}")));
        }
        Ok(())
    }
}

/// Exponential long-tail profile `n_i' = round(n_i mu^i)`, `rho = mu^-(K-1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongTailProfile {
    pub mu: f64,
    pub sizes: Vec<usize>,
}

pub fn longtail_profile(base_counts: &[usize], rho: f64) -> Result<LongTailProfile> {
    let k = base_counts.len();
    if k == 0 {
        return Err(Error::Config("need at least one class".into()));
    }
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(Error::Config(format!("imbalance factor must be >= 1, got {rho}")));
    }
    let mu = if k == 1 {
        1.0
    } else {
        rho.powf(-1.0 / (k as f64 - 1.0))
    };
    let sizes: Vec<usize> = base_counts
        .iter()
        .enumerate()
        .map(|(i, &n)| (n as f64 * mu.powi(i as i32)).round() as usize)
        .collect();
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Config(format!(
            "imbalance factor {rho} leaves class {i} empty"
        )));
    }
    Ok(LongTailProfile { mu, sizes })
}

/// Long-tailed Gaussian-mixture dataset; class 0 is the largest.
pub fn make_longtail(
    base_counts: &[usize],
    rho: f64,
    mixture: &MixtureSpec,
    seed: u64,
) -> Result<(Dataset, LongTailProfile)> {
    mixture.validate()?;
    let profile = longtail_profile(base_counts, rho)?;
    let k = base_counts.len();
    let ds = sample_mixture(&profile.sizes, mixture, &mut rng::stream(seed, "data"), k)?;
    Ok((ds, profile))
}

/// `sizes[k]` draws per class from the mixture, class-sorted.
pub fn sample_mixture(
    sizes: &[usize],
    mixture: &MixtureSpec,
    rng: &mut Rng,
    num_classes: usize,
) -> Result<Dataset> {
    let n: usize = sizes.iter().sum();
    let mut feats = Vec::with_capacity(n * mixture.dim);
    let mut labels = Vec::with_capacity(n);
    for (k, &s) in sizes.iter().enumerate() {
        feats.extend(mixture.sample(k, num_classes, s, rng));
        labels.extend(std::iter::repeat_n(k, s));
    }
    Dataset::new(Tensor::matrix(n, mixture.dim, feats), labels, None, num_classes, None)
}

/// Feature layout for the group dataset: `core_dims` coordinates carry the
/// class signal, `spurious_dims` coordinates carry the group signal, and
/// `noise_dims` are pure noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpuriousSpec {
    pub core_dims: usize,
    pub core_shift: f64,
    pub spurious_dims: usize,
    pub spurious_shift: f64,
    pub noise_dims: usize,
    pub noise_std: f64,
}

impl SpuriousSpec {
    pub fn dim(&self) -> usize {
        self.core_dims + self.spurious_dims + self.noise_dims
    }

    fn cell_mean(&self, class: usize, num_classes: usize, group: usize, num_groups: usize) -> Vec<f64> {
        let centred = |i: usize, n: usize| {
            if n <= 1 {
                0.0
            } else {
                2.0 * i as f64 / (n as f64 - 1.0) - 1.0
            }
        };
        let mut m = Vec::with_capacity(self.dim());
        m.extend(std::iter::repeat_n(self.core_shift * centred(class, num_classes), self.core_dims));
        m.extend(std::iter::repeat_n(
            self.spurious_shift * centred(group, num_groups),
            self.spurious_dims,
        ));
        m.extend(std::iter::repeat_n(0.0, self.noise_dims));
        m
    }

    /// `n` draws from the `(class, group)` cell.
    pub fn sample_cell(
        &self,
        class: usize,
        num_classes: usize,
        group: usize,
        num_groups: usize,
        n: usize,
        rng: &mut Rng,
    ) -> Vec<f64> {
        let mean = self.cell_mean(class, num_classes, group, num_groups);
        let mut out = Vec::with_capacity(n * mean.len());
        for _ in 0..n {
            for &m in &mean {
                let z: f64 = StandardNormal.sample(rng);
                out.push(m + self.noise_std * z);
            }
        }
        out
    }
}

/// Cell sizes for `fractions[class][group]` summing to `n`; the rounding
/// residual goes to the largest cell.
pub fn cell_sizes(fractions: &[Vec<f64>], n: usize) -> Result<Vec<Vec<usize>>> {
    let total: f64 = fractions.iter().flatten().sum();
    if fractions.is_empty()
        || fractions.iter().flatten().any(|&f| !(f >= 0.0))
        || (total - 1.0).abs() > 1e-9
    {
        return Err(Error::Config(format!(
            "cell fractions must be nonnegative and sum to 1 (sum {total})"
        )));
    }
    let g = fractions[0].len();
    if fractions.iter().any(|r| r.len() != g) || g == 0 {
        return Err(Error::Config("fractions must be a K x G matrix".into()));
    }
    let mut sizes: Vec<Vec<usize>> = fractions
        .iter()
        .map(|r| r.iter().map(|&f| (f * n as f64).round() as usize).collect())
        .collect();
    for (k, row) in fractions.iter().enumerate() {
        for (j, &f) in row.iter().enumerate() {
            if f > 0.0 && sizes[k][j] == 0 {
                return Err(Error::Config(format!(
                    "cell ({k},{j}) with fraction {f} rounds to 0 examples at n={n}"
                )));
            }
        }
    }
    let assigned: usize = sizes.iter().flatten().sum();
    let (bk, bj) = largest_cell(fractions);
    if assigned > n {
        sizes[bk][bj] -= assigned - n;
    } else {
        sizes[bk][bj] += n - assigned;
    }
    Ok(sizes)
}

fn largest_cell(fractions: &[Vec<f64>]) -> (usize, usize) {
    let mut best = (0, 0);
    for (k, row) in fractions.iter().enumerate() {
        for (j, &f) in row.iter().enumerate() {
            if f > fractions[best.0][best.1] {
                best = (k, j);
            }
        }
    }
    best
}

/// `(class, group)`-imbalanced dataset with a spurious group feature.
pub fn make_group_dataset(
    fractions: &[Vec<f64>],
    n: usize,
    spec: &SpuriousSpec,
    seed: u64,
) -> Result<Dataset> {
    let sizes = cell_sizes(fractions, n)?;
    sample_cells(&sizes, spec, &mut rng::stream(seed, "data"))
}

pub fn sample_cells(sizes: &[Vec<usize>], spec: &SpuriousSpec, rng: &mut Rng) -> Result<Dataset> {
    let k = sizes.len();
    let g = sizes[0].len();
    let n: usize = sizes.iter().flatten().sum();
    let mut feats = Vec::with_capacity(n * spec.dim());
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for (c, row) in sizes.iter().enumerate() {
        for (j, &s) in row.iter().enumerate() {
            feats.extend(spec.sample_cell(c, k, j, g, s, rng));
            labels.extend(std::iter::repeat_n(c, s));
            groups.extend(std::iter::repeat_n(j, s));
        }
    }
    Dataset::new(Tensor::matrix(n, spec.dim(), feats), labels, Some(groups), k, Some(g))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitDataset {
    pub train: Dataset,
    pub val: Dataset,
    pub split_fraction: f64,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Stratified split: each class (or `(class, group)` cell when groups are
/// present) sends `round(fraction * n_s)` examples to train, clamped so that a
/// stratum with at least two examples keeps one on each side. Singleton
/// strata go to train with a warning.
pub fn split(ds: &Dataset, fraction: f64, seed: u64) -> Result<SplitDataset> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction must be in (0,1), got {fraction}")));
    }
    let mut strata: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..ds.len() {
        strata.entry(ds.stratum(i)).or_default().push(i);
    }
    let mut rng = rng::stream(seed, "split");
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for (s, mut idx) in strata {
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_train = if n == 1 {
            warn!("stratum {s} has a single example; it goes to the training split");
            1
        } else {
            ((fraction * n as f64).round() as usize).clamp(1, n - 1)
        };
        train_idx.extend_from_slice(&idx[..n_train]);
        val_idx.extend_from_slice(&idx[n_train..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    if val_idx.is_empty() {
        return Err(Error::Config("validation split is empty".into()));
    }
    Ok(SplitDataset {
        train: ds.subset(&train_idx)?,
        val: ds.subset(&val_idx)?,
        split_fraction: fraction,
        train_indices: train_idx,
        val_indices: val_idx,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentPolicy {
    /// Per-class ball radius.
    pub radii: Vec<f64>,
    pub samples_per_point: usize,
}

impl AugmentPolicy {
    pub fn none(num_classes: usize) -> Self {
        Self {
            radii: vec![0.0; num_classes],
            samples_per_point: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_point == 0 || self.radii.iter().any(|&r| !(r >= 0.0)) {
            return Err(Error::Config(format!("invalid augmentation policy {self:?}")));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.samples_per_point == 1 && self.radii.iter().all(|&r| r == 0.0)
    }
}

/// A point drawn uniformly from the unit ball in `d` dimensions.
pub fn unit_ball(d: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let r = u.powf(1.0 / d as f64);
        return dir.into_iter().map(|x| x * r / norm).collect();
    }
}

/// `m` spherical augmentations `x + eps_y * u`, `u` uniform in the unit ball.
pub fn augment(x: &[f64], y: usize, policy: &AugmentPolicy, rng: &mut Rng) -> Vec<Vec<f64>> {
    let eps = policy.radii[y];
    (0..policy.samples_per_point)
        .map(|_| {
            if eps == 0.0 {
                return x.to_vec();
            }
            let u = unit_ball(x.len(), rng);
            x.iter().zip(u).map(|(a, b)| a + eps * b).collect()
        })
        .collect()
}

/// JSON sidecar written next to a dataset CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub num_classes: usize,
    pub num_groups: Option<usize>,
    pub dim: usize,
    pub num_examples: usize,
    pub class_counts: Vec<usize>,
    pub group_counts: Option<Vec<Vec<usize>>>,
    pub generator: serde_json::Value,
    pub seed: u64,
}

/// 17 significant digits: parses back to the identical `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..ds.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    if ds.groups.is_some() {
        header.push("group".into());
    }
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.row(i).iter().map(|&x| fmt_f64(x)).collect();
        rec.push(ds.labels[i].to_string());
        if let Some(g) = &ds.groups {
            rec.push(g[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path, meta: &DatasetMeta) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path)?;
    let d = meta.dim;
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    let parse_err = |what: &str| Error::Config(format!("{}: bad {what}", path.display()));
    for rec in r.records() {
        let rec = rec?;
        let want = d + 1 + usize::from(meta.num_groups.is_some());
        if rec.len() != want {
            return Err(Error::Config(format!(
                "{}: expected {want} columns, got {}",
                path.display(),
                rec.len()
            )));
        }
        for j in 0..d {
            feats.push(rec[j].parse::<f64>().map_err(|_| parse_err("feature"))?);
        }
        labels.push(rec[d].parse::<usize>().map_err(|_| parse_err("label"))?);
        if meta.num_groups.is_some() {
            groups.push(rec[d + 1].parse::<usize>().map_err(|_| parse_err("group"))?);
        }
    }
    let n = labels.len();
    Dataset::new(
        Tensor::matrix(n, d, feats),
        labels,
        meta.num_groups.map(|_| groups),
        meta.num_classes,
        meta.num_groups,
    )
}

pub fn meta_for(ds: &Dataset, generator: serde_json::Value, seed: u64) -> DatasetMeta {
    DatasetMeta {
        num_classes: ds.num_classes,
        num_groups: ds.num_groups,
        dim: ds.dim(),
        num_examples: ds.len(),
        class_counts: ds.class_counts.clone(),
        group_counts: ds.group_counts.clone(),
        generator,
        seed,
    }
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn save(ds: &Dataset, meta: &DatasetMeta, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(ds, &dir.join(format!("{stem}.csv")))?;
    let json = serde_json::to_string_pretty(meta)?;
    std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
    Ok(())
}

pub fn load(dir: &Path, stem: &str) -> Result<(Dataset, DatasetMeta)> {
    let meta: DatasetMeta =
        serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    let ds = read_csv(&dir.join(format!("{stem}.csv")), &meta)?;
    Ok((ds, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixture() -> MixtureSpec {
        MixtureSpec {
            dim: 3,
            spacing: 2.0,
            noise_std: 1.0,
        }
    }

    #[test]
    fn longtail_cifar_profile() {
        let p = longtail_profile(&[5000; 10], 100.0).unwrap();
        // mu solves mu^9 = 1/100
        assert!((p.mu.powi(9) - 0.01).abs() < 1e-15);
        assert!((p.mu - 0.599484).abs() < 1e-6);
        assert_eq!(p.sizes[0], 5000);
        assert_eq!(p.sizes[9], 50);
        assert!(p.sizes.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn longtail_identity_and_binary() {
        assert_eq!(longtail_profile(&[7, 7, 7], 1.0).unwrap().sizes, vec![7, 7, 7]);
        let p = longtail_profile(&[100, 100], 4.0).unwrap();
        assert_eq!(p.mu, 0.25);
        assert_eq!(p.sizes, vec![100, 25]);
    }

    #[test]
    fn longtail_empty_class_is_config_error() {
        assert!(matches!(
            longtail_profile(&[10, 10, 10], 1000.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn waterbirds_cell_sizes() {
        // rows: class (-, +); cols: group (1, 2)
        let f = vec![vec![0.012, 0.22], vec![0.73, 0.038]];
        let s = cell_sizes(&f, 1000).unwrap();
        assert_eq!(s, vec![vec![12, 220], vec![730, 38]]);
        let u = vec![vec![0.25, 0.25], vec![0.25, 0.25]];
        assert_eq!(cell_sizes(&u, 400).unwrap(), vec![vec![100, 100], vec![100, 100]]);
        assert!(matches!(cell_sizes(&f, 10), Err(Error::Config(_))));
    }

    #[test]
    fn residual_goes_to_largest_cell() {
        let f = vec![vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]];
        let s = cell_sizes(&f, 100).unwrap();
        assert_eq!(s.iter().flatten().sum::<usize>(), 100);
    }

    #[test]
    fn split_per_class_arithmetic() {
        let (ds, _) = make_longtail(&[50, 10], 1.0, &mixture(), 1).unwrap();
        assert_eq!(ds.class_counts(), &[50, 10]);
        let sp = split(&ds, 0.8, 3).unwrap();
        assert_eq!(sp.train.class_counts(), &[40, 8]);
        assert_eq!(sp.val.class_counts(), &[10, 2]);
        let again = split(&ds, 0.8, 3).unwrap();
        assert_eq!(sp.train_indices, again.train_indices);
        let other = split(&ds, 0.8, 4).unwrap();
        assert_ne!(sp.train_indices, other.train_indices);
    }

    #[test]
    fn split_single_class() {
        let (ds, _) = make_longtail(&[100], 1.0, &mixture(), 1).unwrap();
        let sp = split(&ds, 0.8, 0).unwrap();
        assert_eq!((sp.train.len(), sp.val.len()), (80, 20));
    }

    #[test]
    fn singleton_class_goes_to_train() {
        let (ds, _) = make_longtail(&[10, 1], 1.0, &mixture(), 1).unwrap();
        let sp = split(&ds, 0.8, 0).unwrap();
        assert_eq!(sp.train.class_counts(), &[8, 1]);
        assert_eq!(sp.val.class_counts(), &[2, 0]);
    }

    #[test]
    fn augmentation_identity_and_ball() {
        let mut rng = rng::stream(0, "aug");
        let x = [1.0, -2.0, 0.5];
        let p = AugmentPolicy {
            radii: vec![0.0, 0.7],
            samples_per_point: 4,
        };
        for out in augment(&x, 0, &p, &mut rng) {
            assert_eq!(out, x);
        }
        for out in augment(&x, 1, &p, &mut rng) {
            let d: f64 = out.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(d <= 0.7);
        }
    }

    #[test]
    fn rejects_out_of_range_labels() {
        let r = Dataset::new(Tensor::matrix(1, 1, vec![0.0]), vec![3], None, 2, None);
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
