//! 0/1 evaluation objectives, Pareto fronts, and the posthoc vector-scaling
//! baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{argmax_rows, ModelSpec};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub std_err: f64,
    pub balanced_err: f64,
    pub per_class_err: Vec<f64>,
    pub group_balanced_err: Option<f64>,
    /// `[class][group]`.
    pub per_cell_err: Option<Vec<Vec<f64>>>,
    pub deo: Option<f64>,
    pub worst_cell_err: Option<f64>,
}

/// Metrics of argmax predictions. Every class (and every `(class, group)`
/// cell when groups are present) must occur in `ds`.
pub fn evaluate_predictions(preds: &[usize], ds: &Dataset) -> Result<MetricsReport> {
    let k = ds.num_classes();
    let labels = ds.labels();
    if preds.len() != labels.len() {
        return Err(Error::Eval("one prediction per example is required".into()));
    }
    let mut wrong = vec![0usize; k];
    for (&p, &y) in preds.iter().zip(labels) {
        wrong[y] += usize::from(p != y);
    }
    let counts = ds.class_counts();
    if let Some(c) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Eval(format!("class {c} has no evaluation examples")));
    }
    let per_class_err: Vec<f64> = wrong.iter().zip(counts).map(|(&w, &c)| w as f64 / c as f64).collect();
    let std_err = wrong.iter().sum::<usize>() as f64 / labels.len() as f64;
    let balanced_err = per_class_err.iter().sum::<f64>() / k as f64;

    let (mut group_balanced_err, mut per_cell_err, mut deo, mut worst_cell_err) = (None, None, None, None);
    if let (Some(groups), Some(g), Some(cell_counts)) = (ds.groups(), ds.num_groups(), ds.group_counts()) {
        let mut cw = vec![vec![0usize; g]; k];
        for ((&p, &y), &gi) in preds.iter().zip(labels).zip(groups) {
            cw[y][gi] += usize::from(p != y);
        }
        let mut cells = vec![vec![0.0; g]; k];
        for y in 0..k {
            for j in 0..g {
                if cell_counts[y][j] == 0 {
                    return Err(Error::Eval(format!(
                        "(class, group) cell ({y}, {j}) has no evaluation examples"
                    )));
                }
                cells[y][j] = cw[y][j] as f64 / cell_counts[y][j] as f64;
            }
        }
        let flat: Vec<f64> = cells.iter().flatten().copied().collect();
        group_balanced_err = Some(flat.iter().sum::<f64>() / flat.len() as f64);
        worst_cell_err = Some(flat.iter().fold(0.0f64, |a, &b| a.max(b)));
        if k == 2 && g == 2 {
            deo = Some(deo_from_cells(&cells));
        }
        per_cell_err = Some(cells);
    }
    Ok(MetricsReport {
        std_err,
        balanced_err,
        per_class_err,
        group_balanced_err,
        per_cell_err,
        deo,
        worst_cell_err,
    })
}

/// `|E_{+,1} - E_{+,2}| + |E_{-,1} - E_{-,2}|` from a 2 x 2 `[class][group]`
/// table.
pub fn deo_from_cells(cells: &[Vec<f64>]) -> f64 {
    (cells[1][0] - cells[1][1]).abs() + (cells[0][0] - cells[0][1]).abs()
}

pub fn evaluate_logits(logits: &Tensor, ds: &Dataset) -> Result<MetricsReport> {
    evaluate_predictions(&argmax_rows(logits), ds)
}

pub fn evaluate(spec: &ModelSpec, theta: &Tensor, ds: &Dataset) -> Result<MetricsReport> {
    evaluate_logits(&spec.logits(theta, ds.features()), ds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub lambda: f64,
    pub std_err: f64,
    pub fairness_value: f64,
    pub tag: String,
}

fn dominates(a: &ParetoPoint, b: &ParetoPoint) -> bool {
    a.std_err <= b.std_err
        && a.fairness_value <= b.fairness_value
        && (a.std_err < b.std_err || a.fairness_value < b.fairness_value)
}

/// Non-dominated points, sorted by `std_err` (stable).
pub fn pareto_front(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut out: Vec<ParetoPoint> = points
        .iter()
        .filter(|p| !points.iter().any(|q| dominates(q, p)))
        .cloned()
        .collect();
    out.sort_by(|a, b| a.std_err.total_cmp(&b.std_err));
    out
}

/// Flags marking the non-dominated entries of `points`, in input order.
pub fn frontier_flags(points: &[ParetoPoint]) -> Vec<bool> {
    points
        .iter()
        .map(|p| !points.iter().any(|q| dominates(q, p)))
        .collect()
}

/// Area dominated by `points` inside the box bounded by `reference`
/// (both coordinates minimized).
pub fn hypervolume(points: &[ParetoPoint], reference: (f64, f64)) -> f64 {
    let mut front: Vec<(f64, f64)> = pareto_front(points)
        .iter()
        .map(|p| (p.std_err, p.fairness_value))
        .filter(|&(x, y)| x <= reference.0 && y <= reference.1)
        .collect();
    front.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut area = 0.0;
    let mut ceiling = reference.1;
    for (x, y) in front {
        if y < ceiling {
            area += (reference.0 - x) * (ceiling - y);
            ceiling = y;
        }
    }
    area
}

/// Componentwise worst `(std_err, fairness_value)` over all point sets.
pub fn worst_corner<'a>(sets: impl IntoIterator<Item = &'a [ParetoPoint]>) -> (f64, f64) {
    let mut r = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for s in sets {
        for p in s {
            r.0 = r.0.max(p.std_err);
            r.1 = r.1.max(p.fairness_value);
        }
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PosthocObjective {
    Balanced,
    /// `(1 - lambda) * std_err + lambda * deo`.
    Blend { lambda: f64 },
}

/// Inclusive `lo..=hi` in increments of `step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridAxis {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.hi >= self.lo) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::Config(format!("degenerate grid axis {self:?}")));
        }
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| self.lo + i as f64 * self.step).collect())
    }
}

/// Grid over `(w_1, b_1)` with `w_2 = 1`, `b_2 = 0` fixed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosthocGrid {
    pub w: GridAxis,
    pub b: GridAxis,
}

impl Default for PosthocGrid {
    fn default() -> Self {
        Self {
            w: GridAxis { lo: 0.5, hi: 2.0, step: 0.05 },
            b: GridAxis { lo: -2.0, hi: 2.0, step: 0.05 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosthocResult {
    pub w: [f64; 2],
    pub b: [f64; 2],
    pub objective: f64,
    pub report: MetricsReport,
}

fn posthoc_objective(obj: PosthocObjective, r: &MetricsReport) -> Result<f64> {
    match obj {
        PosthocObjective::Balanced => Ok(r.balanced_err),
        PosthocObjective::Blend { lambda } => {
            let deo = r
                .deo
                .ok_or_else(|| Error::Config("blend objective needs two groups".into()))?;
            Ok((1.0 - lambda) * r.std_err + lambda * deo)
        }
    }
}

fn scaled_preds(logits: &Tensor, w: [f64; 2], b: [f64; 2]) -> Vec<usize> {
    let (n, _) = logits.dims2();
    (0..n)
        .map(|i| {
            let r = logits.row(i);
            let s0 = w[0] * r[0] + b[0];
            let s1 = w[1] * r[1] + b[1];
            usize::from(s1 > s0)
        })
        .collect()
}

/// Grid search for vector scaling `f' = w * f + b` on binary logits; ties go
/// to the first grid point (`w` outer, `b` inner).
pub fn posthoc_vector_scaling(
    logits: &Tensor,
    ds: &Dataset,
    objective: PosthocObjective,
    grid: &PosthocGrid,
) -> Result<PosthocResult> {
    if ds.num_classes() != 2 || logits.dims2().1 != 2 {
        return Err(Error::Config("vector scaling is implemented for binary logits".into()));
    }
    let ws = grid.w.values()?;
    let bs = grid.b.values()?;
    let points: Vec<(usize, f64, f64)> = ws
        .iter()
        .flat_map(|&w| bs.iter().map(move |&b| (w, b)))
        .enumerate()
        .map(|(i, (w, b))| (i, w, b))
        .collect();
    let scored: Result<Vec<(f64, usize)>> = points
        .par_iter()
        .map(|&(i, w, b)| {
            let r = evaluate_predictions(&scaled_preds(logits, [w, 1.0], [b, 0.0]), ds)?;
            Ok((posthoc_objective(objective, &r)?, i))
        })
        .collect();
    let (val, best) = scored?
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("grid is nonempty");
    let (_, w, b) = points[best];
    let report = evaluate_predictions(&scaled_preds(logits, [w, 1.0], [b, 0.0]), ds)?;
    Ok(PosthocResult {
        w: [w, 1.0],
        b: [b, 0.0],
        objective: val,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(s: f64, f: f64) -> ParetoPoint {
        ParetoPoint {
            lambda: 0.0,
            std_err: s,
            fairness_value: f,
            tag: String::new(),
        }
    }

    fn group_ds() -> Dataset {
        // two examples per (class, group) cell
        let labels = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let groups = vec![0, 0, 1, 1, 0, 0, 1, 1];
        Dataset::new(Tensor::zeros(&[8, 1]), labels, Some(groups), 2, Some(2)).unwrap()
    }

    #[test]
    fn perfect_classifier() {
        let ds = group_ds();
        let r = evaluate_predictions(ds.labels(), &ds).unwrap();
        assert_eq!((r.std_err, r.balanced_err, r.deo), (0.0, 0.0, Some(0.0)));
        assert_eq!(r.worst_cell_err, Some(0.0));
    }

    #[test]
    fn balanced_error_is_mean_of_classes() {
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let ds = Dataset::new(Tensor::zeros(&[20, 1]), labels.clone(), None, 2, None).unwrap();
        let mut preds = labels;
        preds[0] = 1; // class 0: 1/10
        preds[10] = 0;
        preds[11] = 0;
        preds[12] = 0; // class 1: 3/10
        let r = evaluate_predictions(&preds, &ds).unwrap();
        assert!((r.balanced_err - 0.2).abs() < 1e-15);
    }

    #[test]
    fn deo_arithmetic() {
        // E+,1 = 0.4, E+,2 = 0.1, E-,1 = 0.2, E-,2 = 0.2
        let cells = vec![vec![0.2, 0.2], vec![0.4, 0.1]];
        assert!((deo_from_cells(&cells) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn empty_cell_is_eval_error() {
        let ds = Dataset::new(Tensor::zeros(&[2, 1]), vec![0, 1], Some(vec![0, 0]), 2, Some(2)).unwrap();
        assert!(matches!(evaluate_predictions(&[0, 1], &ds), Err(Error::Eval(_))));
    }

    #[test]
    fn pareto_examples() {
        assert_eq!(pareto_front(&[pt(0.3, 0.3)]), vec![pt(0.3, 0.3)]);
        let f = pareto_front(&[pt(0.1, 0.5), pt(0.2, 0.4), pt(0.15, 0.6)]);
        assert_eq!(f, vec![pt(0.1, 0.5), pt(0.2, 0.4)]);
        assert_eq!(pareto_front(&vec![pt(0.2, 0.2); 3]).len(), 3);
    }

    #[test]
    fn hypervolume_staircase() {
        let pts = [pt(0.1, 0.5), pt(0.2, 0.4)];
        // (1-0.1)*(1-0.5) + (1-0.2)*(0.5-0.4)
        assert!((hypervolume(&pts, (1.0, 1.0)) - (0.45 + 0.08)).abs() < 1e-12);
        assert_eq!(hypervolume(&pts, (0.05, 1.0)), 0.0);
    }

    #[test]
    fn posthoc_constant_shift() {
        let ds = group_ds();
        let logits = Tensor::zeros(&[8, 2]);
        let grid = PosthocGrid {
            w: GridAxis { lo: 1.0, hi: 1.0, step: 0.1 },
            b: GridAxis { lo: 1.0, hi: 1.0, step: 0.1 },
        };
        let r = posthoc_vector_scaling(&logits, &ds, PosthocObjective::Balanced, &grid).unwrap();
        assert_eq!(r.report.per_class_err, vec![0.0, 1.0]);
        let bad = PosthocGrid {
            w: GridAxis { lo: 1.0, hi: 0.0, step: 0.1 },
            ..grid
        };
        assert!(matches!(
            posthoc_vector_scaling(&logits, &ds, PosthocObjective::Balanced, &bad),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn default_grid_size() {
        let g = PosthocGrid::default();
        assert_eq!(g.w.values().unwrap().len(), 31);
        assert_eq!(g.b.values().unwrap().len(), 81);
    }
}
