use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Binary data with labels in `{-1, +1}`; rows are points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinaryData {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl BinaryData {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Shape(format!("{} points with {} labels", x.len(), y.len())));
        }
        let d = x[0].len();
        if d == 0 || x.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("points must share one positive dimension".into()));
        }
        if y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::Config("labels must be -1 or +1".into()));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite feature".into()));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    /// Signed margin `y_i w . x_i`.
    pub fn margin(&self, i: usize, w: &[f64]) -> f64 {
        self.y[i] * dot(&self.x[i], w)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SvmSolution {
    pub w: Vec<f64>,
    /// `||w||`.
    pub objective: f64,
    /// Constraint slack per point; nonnegative up to round-off.
    pub active_margins: Vec<f64>,
    /// Multipliers of the `min ||w||` form: `w / ||w|| = sum_i dual_i y_i x_i`.
    pub dual: Vec<f64>,
}

impl SvmSolution {
    pub fn direction(&self) -> Vec<f64> {
        self.w.iter().map(|v| v / self.objective).collect()
    }

    /// Largest of the sign, complementary-slackness and stationarity
    /// residuals of the KKT system.
    pub fn kkt_residual(&self, data: &BinaryData) -> f64 {
        let neg = self.dual.iter().map(|&a| (-a).max(0.0)).fold(0.0, f64::max);
        let comp = self
            .dual
            .iter()
            .zip(&self.active_margins)
            .map(|(a, s)| (a * s).abs())
            .fold(0.0, f64::max);
        let mut r: Vec<f64> = self.direction();
        for (i, a) in self.dual.iter().enumerate() {
            for (rj, xj) in r.iter_mut().zip(&data.x[i]) {
                *rj -= a * data.y[i] * xj;
            }
        }
        neg.max(comp).max(norm(&r))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn margins(delta_plus: f64, delta_minus: f64) -> Result<(f64, f64)> {
    for (name, d) in [("delta_plus", delta_plus), ("delta_minus", delta_minus)] {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Config(format!("{name} must be positive and finite, got {d}")));
        }
    }
    Ok((1.0 / delta_plus, 1.0 / delta_minus))
}

const FEAS_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 2_000_000;

/// Minimum-norm homogeneous classifier with `w . x_i >= 1/delta_plus` on
/// positives and `w . x_i <= -1/delta_minus` on negatives.
///
/// Dual coordinate ascent on `sum a_i b_i - ||sum a_i y_i x_i||^2 / 2`,
/// finished by solving the equality system on the identified support set.
pub fn solve_cs_svm(data: &BinaryData, delta_plus: f64, delta_minus: f64) -> Result<SvmSolution> {
    let (bp, bm) = margins(delta_plus, delta_minus)?;
    let b: Vec<f64> = data.y.iter().map(|&y| if y > 0.0 { bp } else { bm }).collect();
    solve_margins(data, &b)
}

/// Minimum-norm `w` with `y_i w . x_i >= b_i` for all `i`.
pub fn solve_margins(data: &BinaryData, b: &[f64]) -> Result<SvmSolution> {
    let n = data.len();
    let d = data.dim();
    if b.len() != n {
        return Err(Error::Shape(format!("{} margins for {n} points", b.len())));
    }
    let sq: Vec<f64> = data.x.iter().map(|x| dot(x, x)).collect();
    if let Some(i) = sq.iter().position(|&s| s == 0.0) {
        return Err(Error::Infeasible(format!("point {i} is at the origin")));
    }
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut a = vec![0.0; n];
    let mut w = vec![0.0; d];
    for sweep in 0..MAX_SWEEPS {
        let mut change = 0.0f64;
        for i in 0..n {
            let g = b[i] - data.margin(i, &w);
            let new = (a[i] + g / sq[i]).max(0.0);
            let step = new - a[i];
            if step != 0.0 {
                a[i] = new;
                for (wj, xj) in w.iter_mut().zip(&data.x[i]) {
                    *wj += step * data.y[i] * xj;
                }
                change = change.max(step.abs() * sq[i].sqrt());
            }
        }
        if !a.iter().all(|v| v.is_finite()) || a.iter().sum::<f64>() > 1e12 * (1.0 + scale) {
            return Err(Error::Infeasible("dual is unbounded; data not separable with these margins".into()));
        }
        if sweep % 25 == 24 || change < 1e-15 * (1.0 + norm(&w)) {
            if let Some(sol) = polish(data, b, &a) {
                return Ok(sol);
            }
            if change < 1e-15 * (1.0 + norm(&w)) {
                break;
            }
        }
    }
    finish(data, b, w, &a).ok_or_else(|| Error::Infeasible("no feasible homogeneous separator found".into()))
}

/// Solve `y_i x_i . w = b_i` on the support of `a` for the least-norm `w`,
/// then recover the multipliers; accept only a verified KKT point.
fn polish(data: &BinaryData, b: &[f64], a: &[f64]) -> Option<SvmSolution> {
    let top = a.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return None;
    }
    let support: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 1e-10 * top).collect();
    let d = data.dim();
    let rows = DMatrix::from_fn(support.len(), d, |r, c| data.y[support[r]] * data.x[support[r]][c]);
    let rhs = DVector::from_iterator(support.len(), support.iter().map(|&i| b[i]));
    let svd = rows.clone().svd(true, true);
    let w = svd.solve(&rhs, 1e-12).ok()?;
    let wv: Vec<f64> = w.iter().copied().collect();
    let mult = rows.transpose().svd(true, true).solve(&w, 1e-12).ok()?;
    let mut full = vec![0.0; a.len()];
    for (k, &i) in support.iter().enumerate() {
        full[i] = mult[k];
    }
    finish(data, b, wv, &full)
}

fn finish(data: &BinaryData, b: &[f64], w: Vec<f64>, a: &[f64]) -> Option<SvmSolution> {
    let objective = norm(&w);
    if objective == 0.0 || !objective.is_finite() {
        return None;
    }
    let active_margins: Vec<f64> = (0..data.len()).map(|i| data.margin(i, &w) - b[i]).collect();
    let tol = FEAS_TOL * (1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    if active_margins.iter().any(|&s| s < -tol) {
        return None;
    }
    let sol = SvmSolution {
        dual: a.iter().map(|v| v / objective).collect(),
        w,
        objective,
        active_margins,
    };
    (sol.kkt_residual(data) <= 1e-8).then_some(sol)
}

/// Norm-coupled SVM in the plane: minimise `||w||` subject to
/// `y_i w . x_i - eps_{y_i} ||w|| >= 1`.
///
/// Writing `w = r u` with `u` on the unit circle, feasibility needs
/// `m(u) = min_i (y_i u . x_i - eps_i) > 0` and the best radius is `1/m(u)`.
/// `m` is maximised by a dense angle grid and golden-section refinement.
pub fn solve_augmented_svm_2d(data: &BinaryData, eps_plus: f64, eps_minus: f64) -> Result<SvmSolution> {
    if data.dim() != 2 {
        return Err(Error::Shape(format!("augmented solver is planar, got dimension {}", data.dim())));
    }
    if !(eps_plus.is_finite() && eps_minus.is_finite()) {
        return Err(Error::Config("eps must be finite".into()));
    }
    let eps: Vec<f64> = data.y.iter().map(|&y| if y > 0.0 { eps_plus } else { eps_minus }).collect();
    let m = |phi: f64| {
        let u = [phi.cos(), phi.sin()];
        (0..data.len()).map(|i| data.margin(i, &u) - eps[i]).fold(f64::INFINITY, f64::min)
    };
    const GRID: usize = 100_000;
    let h = std::f64::consts::TAU / GRID as f64;
    let (mut best, mut best_m) = (0.0, f64::NEG_INFINITY);
    for k in 0..GRID {
        let phi = k as f64 * h;
        let v = m(phi);
        if v > best_m {
            best = phi;
            best_m = v;
        }
    }
    if best_m <= 0.0 {
        return Err(Error::Infeasible("no direction meets every augmented margin".into()));
    }
    let inv = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (best - h, best + h);
    let mut c = hi - inv * (hi - lo);
    let mut e = lo + inv * (hi - lo);
    let (mut fc, mut fe) = (m(c), m(e));
    while hi - lo > 1e-12 {
        if fc >= fe {
            hi = e;
            e = c;
            fe = fc;
            c = hi - inv * (hi - lo);
            fc = m(c);
        } else {
            lo = c;
            c = e;
            fc = fe;
            e = lo + inv * (hi - lo);
            fe = m(e);
        }
    }
    let refined = 0.5 * (lo + hi);
    let (phi, mm) = match m(refined) {
        v if v >= best_m => (refined, v),
        _ => (best, best_m),
    };
    let r = 1.0 / mm;
    let w = vec![r * phi.cos(), r * phi.sin()];
    let active_margins: Vec<f64> = (0..data.len()).map(|i| data.margin(i, &w) - eps[i] * r - 1.0).collect();
    if active_margins.iter().any(|&s| s < -1e-8) {
        return Err(Error::Infeasible("refined direction violates a constraint".into()));
    }
    Ok(SvmSolution {
        w,
        objective: r,
        active_margins,
        dual: Vec::new(),
    })
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (norm(a) * norm(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(x: Vec<Vec<f64>>, y: Vec<f64>) -> BinaryData {
        BinaryData::new(x, y).unwrap()
    }

    #[test]
    fn one_dimensional_hand_case() {
        let d = data(vec![vec![2.0], vec![-1.0]], vec![1.0, -1.0]);
        let s = solve_cs_svm(&d, 0.5, 1.0).unwrap();
        assert!((s.w[0] - 1.0).abs() < 1e-12);
        assert!(s.kkt_residual(&d) <= 1e-8);
    }

    #[test]
    fn doubling_margins_doubles_norm() {
        let d = data(
            vec![vec![1.0, 2.0], vec![2.0, 0.5], vec![-1.0, -1.0], vec![-0.5, -2.0]],
            vec![1.0, 1.0, -1.0, -1.0],
        );
        let a = solve_cs_svm(&d, 0.8, 0.4).unwrap();
        let b = solve_cs_svm(&d, 0.4, 0.2).unwrap();
        assert!((b.objective - 2.0 * a.objective).abs() < 1e-10);
    }

    #[test]
    fn contradictory_labels_are_infeasible() {
        let d = data(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, -1.0]);
        assert!(matches!(solve_cs_svm(&d, 0.5, 0.5), Err(Error::Infeasible(_))));
        assert!(matches!(solve_augmented_svm_2d(&d, 0.0, 0.0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn zero_augmentation_is_plain_svm() {
        let d = data(
            vec![vec![1.0, 2.0], vec![2.0, 0.5], vec![-1.0, -1.0], vec![-0.5, -2.0]],
            vec![1.0, 1.0, -1.0, -1.0],
        );
        let s = solve_cs_svm(&d, 1.0, 1.0).unwrap();
        let t = solve_augmented_svm_2d(&d, 0.0, 0.0).unwrap();
        assert!((s.objective - t.objective).abs() < 1e-8);
        assert!(cosine(&s.w, &t.w) > 1.0 - 1e-12);
    }
}
