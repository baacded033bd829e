//! Lasso regression `min (1/2n)|y - X b - b0|^2 + lambda |b|_1` by cyclic
//! coordinate descent in covariance form, with leave-one-out selection of
//! `lambda`.

use super::{BaselineError, VARIANCE_FLOOR};
use crate::density::StudentT;
use nalgebra::{DMatrix, DVector};

const KKT_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100_000;
/// Relative size below which a Gram diagonal counts as a constant column.
const DEGENERATE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub lambda: f64,
    pub intercept: f64,
    pub coefficients: DVector<f64>,
    /// `RSS / max(n - active - 1, 1)`, floored.
    pub residual_variance: f64,
    pub n_rows: usize,
    pub sweeps: usize,
}

impl LassoFit {
    pub fn active(&self) -> usize {
        self.coefficients.iter().filter(|b| **b != 0.0).count()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Centered second moments of a design: `G = Xc'Xc / n`, `c = Xc'yc / n`.
struct Moments {
    g: DMatrix<f64>,
    c: DVector<f64>,
    x_mean: DVector<f64>,
    y_mean: f64,
}

impl Moments {
    fn new(x: &DMatrix<f64>, y: &[f64]) -> Self {
        let n = x.nrows() as f64;
        let x_mean = DVector::from_fn(x.ncols(), |j, _| x.column(j).sum() / n);
        let y_mean = y.iter().sum::<f64>() / n;
        let mut xc = x.clone();
        for j in 0..x.ncols() {
            xc.column_mut(j).add_scalar_mut(-x_mean[j]);
        }
        let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
        Self { g: xc.tr_mul(&xc) / n, c: xc.tr_mul(&yc) / n, x_mean, y_mean }
    }
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

fn degenerate_columns(g: &DMatrix<f64>) -> Vec<bool> {
    let scale = g.diagonal().amax().max(1.0);
    (0..g.nrows()).map(|j| g[(j, j)] <= DEGENERATE * scale).collect()
}

/// Largest KKT violation of `beta` for the covariance-form problem.
fn kkt_gap(g: &DMatrix<f64>, c: &DVector<f64>, beta: &DVector<f64>, lambda: f64, skip: &[bool]) -> f64 {
    let grad = c - g * beta;
    (0..beta.len())
        .filter(|&j| !skip[j])
        .map(|j| {
            if beta[j] != 0.0 {
                (grad[j] - lambda * beta[j].signum()).abs()
            } else {
                (grad[j].abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn objective(g: &DMatrix<f64>, c: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    0.5 * beta.dot(&(g * beta)) - c.dot(beta) + lambda * beta.lp_norm(1)
}

/// Coordinate descent from the warm start in `beta`. Columns flagged in `skip`
/// stay at zero. Returns the number of sweeps.
fn descend(
    g: &DMatrix<f64>,
    c: &DVector<f64>,
    lambda: f64,
    beta: &mut DVector<f64>,
    skip: &[bool],
    tol: f64,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<usize, BaselineError> {
    let p = beta.len();
    let mut grad = c - g * &*beta;
    let mut active: Vec<usize> = Vec::with_capacity(p);
    let mut full = true;
    let mut prev_pattern: Vec<i8> = beta.iter().map(|b| b.signum() as i8 * i8::from(*b != 0.0)).collect();
    // a warm start usually has the right signs already
    if prev_pattern.iter().any(|s| *s != 0) {
        if let Some(exact) = face_minimizer(g, c, lambda, &prev_pattern) {
            let keeps_signs = (0..p).all(|j| exact[j].signum() as i8 * i8::from(exact[j] != 0.0) == prev_pattern[j]);
            if keeps_signs && kkt_gap(g, c, &exact, lambda, skip) <= tol {
                *beta = exact;
                return Ok(0);
            }
        }
    }
    for sweep in 1..=MAX_SWEEPS {
        // full sweeps alternate with sweeps over the current non-zero set
        if full {
            active.clear();
            active.extend((0..p).filter(|&j| !skip[j]));
        } else {
            active.retain(|&j| beta[j] != 0.0);
        }
        let mut max_step = 0.0f64;
        for &j in &active {
            let gjj = g[(j, j)];
            let old = beta[j];
            let new = soft_threshold(grad[j] + gjj * old, lambda) / gjj;
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                grad.axpy(-delta, &g.column(j), 1.0);
                max_step = max_step.max(delta.abs() * gjj.sqrt());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(objective(g, c, beta, lambda));
        }
        let pattern: Vec<i8> = beta.iter().map(|b| b.signum() as i8 * i8::from(*b != 0.0)).collect();
        if pattern == prev_pattern {
            if let Some(target) = face_minimizer(g, c, lambda, &pattern) {
                if let Some(better) = sign_line_search(g, c, lambda, beta, &target) {
                    *beta = better;
                    grad = c - g * &*beta;
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(objective(g, c, beta, lambda));
                    }
                    if kkt_gap(g, c, beta, lambda, skip) <= tol {
                        return Ok(sweep);
                    }
                    full = true;
                    prev_pattern.clear();
                    continue;
                }
            }
        }
        prev_pattern = pattern;
        if max_step <= tol {
            if !full {
                full = true;
                continue;
            }
            grad = c - g * &*beta;
            let gap = kkt_gap(g, c, beta, lambda, skip);
            if gap <= tol {
                return Ok(sweep);
            }
        } else {
            full = false;
        }
    }
    Err(BaselineError::NoConvergence { sweeps: MAX_SWEEPS, gap: kkt_gap(g, c, beta, lambda, skip) })
}

/// Minimizer of the quadratic that agrees with the objective on the face
/// fixed by `pattern`: `G_AA b_A = c_A - lambda s_A`, zero off the support.
fn face_minimizer(g: &DMatrix<f64>, c: &DVector<f64>, lambda: f64, pattern: &[i8]) -> Option<DVector<f64>> {
    let support: Vec<usize> = (0..pattern.len()).filter(|&j| pattern[j] != 0).collect();
    if support.is_empty() {
        return None;
    }
    let k = support.len();
    let g_aa = DMatrix::from_fn(k, k, |a, b| g[(support[a], support[b])]);
    let rhs = DVector::from_fn(k, |a, _| c[support[a]] - lambda * f64::from(pattern[support[a]]));
    let b = g_aa.cholesky()?.solve(&rhs);
    let mut out = DVector::zeros(pattern.len());
    for (a, &j) in support.iter().enumerate() {
        out[j] = b[a];
    }
    Some(out)
}

/// Best point on the segment from `from` to `to` among `to` and the points
/// where a coordinate crosses zero (the objective is piecewise quadratic and
/// convex along the segment, with breaks only there). `None` unless strictly
/// better than `from`.
fn sign_line_search(
    g: &DMatrix<f64>,
    c: &DVector<f64>,
    lambda: f64,
    from: &DVector<f64>,
    to: &DVector<f64>,
) -> Option<DVector<f64>> {
    let mut steps = vec![1.0];
    for j in 0..from.len() {
        if from[j] != 0.0 && from[j].signum() != to[j].signum() {
            steps.push(from[j] / (from[j] - to[j]));
        }
    }
    let start = objective(g, c, from, lambda);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for a in steps {
        let mut point = from + (to - from) * a;
        for j in 0..point.len() {
            if from[j] != 0.0 && (from[j] - to[j]) != 0.0 && from[j] / (from[j] - to[j]) == a {
                point[j] = 0.0;
            }
        }
        let value = objective(g, c, &point, lambda);
        if value < best.as_ref().map_or(start, |b| b.0) {
            best = Some((value, point));
        }
    }
    best.map(|b| b.1)
}

/// `max_j |x_j'(y - ybar)| / n`: the smallest penalty giving all-zero slopes.
pub fn lambda_max(x: &DMatrix<f64>, y: &[f64]) -> f64 {
    Moments::new(x, y).c.amax()
}

/// `count` log-spaced penalties from `lambda_max` down to `lambda_max * ratio`.
pub fn lambda_grid(lambda_max: f64, count: usize, ratio: f64) -> Vec<f64> {
    if !(lambda_max > 0.0) || count <= 1 {
        return vec![lambda_max.max(0.0)];
    }
    let (hi, lo) = (lambda_max.ln(), (lambda_max * ratio).ln());
    (0..count)
        .map(|i| (hi + (lo - hi) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

fn check_inputs(x: &DMatrix<f64>, y: &[f64]) -> Result<(), BaselineError> {
    if x.nrows() != y.len() {
        return Err(BaselineError::Shape(format!("{} design rows for {} targets", x.nrows(), y.len())));
    }
    if y.len() < 2 {
        return Err(BaselineError::TooFew { needed: 2, got: y.len() });
    }
    Ok(())
}

pub fn lasso_fit(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<LassoFit, BaselineError> {
    fit_traced(x, y, lambda, None)
}

pub(crate) fn fit_traced(
    x: &DMatrix<f64>,
    y: &[f64],
    lambda: f64,
    trace: Option<&mut Vec<f64>>,
) -> Result<LassoFit, BaselineError> {
    check_inputs(x, y)?;
    if !(lambda >= 0.0) {
        return Err(BaselineError::NegativeLambda(lambda));
    }
    let m = Moments::new(x, y);
    let skip = degenerate_columns(&m.g);
    if let Some(j) = skip.iter().position(|s| *s) {
        return Err(BaselineError::ZeroVariance(j));
    }
    let mut beta = DVector::zeros(x.ncols());
    let sweeps = descend(&m.g, &m.c, lambda, &mut beta, &skip, KKT_TOL, trace)?;
    let intercept = m.y_mean - m.x_mean.dot(&beta);
    let n = y.len();
    let rss: f64 = (0..n)
        .map(|i| {
            let fitted = intercept + x.row(i).transpose().dot(&beta);
            (y[i] - fitted).powi(2)
        })
        .sum();
    let active = beta.iter().filter(|b| **b != 0.0).count();
    let denom = n.saturating_sub(active + 1).max(1) as f64;
    Ok(LassoFit {
        lambda,
        intercept,
        coefficients: beta,
        residual_variance: (rss / denom).max(VARIANCE_FLOOR),
        n_rows: n,
        sweeps,
    })
}

/// Largest KKT violation of `fit` on the raw data `(x, y)`.
pub fn kkt_residual(x: &DMatrix<f64>, y: &[f64], fit: &LassoFit) -> f64 {
    let m = Moments::new(x, y);
    let skip = vec![false; x.ncols()];
    kkt_gap(&m.g, &m.c, &fit.coefficients, fit.lambda, &skip)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSelection {
    pub lambda: f64,
    /// Leave-one-out mean squared error per grid point, in grid order.
    pub loo_mse: Vec<f64>,
}

/// Choose `lambda` from `grid` by leave-one-out squared prediction error;
/// ties go to the larger penalty.
pub fn lasso_loo_select(x: &DMatrix<f64>, y: &[f64], grid: &[f64]) -> Result<LassoSelection, BaselineError> {
    check_inputs(x, y)?;
    if grid.is_empty() {
        return Err(BaselineError::EmptyGrid);
    }
    if let Some(bad) = grid.iter().find(|l| !(**l >= 0.0)) {
        return Err(BaselineError::NegativeLambda(*bad));
    }
    let full = Moments::new(x, y);
    if let Some(j) = degenerate_columns(&full.g).iter().position(|s| *s) {
        return Err(BaselineError::ZeroVariance(j));
    }
    let (n, p) = (x.nrows(), x.ncols());
    // shift by the full-sample means so the rank-one downdates stay well conditioned
    let mut xs = x.clone();
    for j in 0..p {
        xs.column_mut(j).add_scalar_mut(-full.x_mean[j]);
    }
    let ys: Vec<f64> = y.iter().map(|v| v - full.y_mean).collect();
    let ys_vec = DVector::from_column_slice(&ys);
    let sxx = xs.tr_mul(&xs);
    let sxy = xs.tr_mul(&ys_vec);
    let sx = DVector::from_fn(p, |j, _| xs.column(j).sum());
    let sy: f64 = ys.iter().sum();

    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));
    let mut sq_err = vec![0.0; grid.len()];
    let m = (n - 1) as f64;
    // each fold starts from the previous fold's solution at the same penalty
    let mut warm = vec![DVector::zeros(p); grid.len()];
    for i in 0..n {
        let xi = xs.row(i).transpose();
        let yi = ys[i];
        let x_mean = (&sx - &xi) / m;
        let y_mean = (sy - yi) / m;
        let g = (&sxx - &xi * xi.transpose()) / m - &x_mean * x_mean.transpose();
        let c = (&sxy - &xi * yi) / m - &x_mean * y_mean;
        let skip = degenerate_columns(&g);
        for &k in &order {
            let beta = &mut warm[k];
            for j in (0..p).filter(|&j| skip[j]) {
                beta[j] = 0.0;
            }
            descend(&g, &c, grid[k], beta, &skip, KKT_TOL, None)?;
            let pred = y_mean + (&xi - &x_mean).dot(&beta);
            sq_err[k] += (yi - pred).powi(2);
        }
    }
    let loo_mse: Vec<f64> = sq_err.iter().map(|s| s / n as f64).collect();
    let mut best = order[0];
    for &k in &order[1..] {
        if loo_mse[k] < loo_mse[best] {
            best = k;
        }
    }
    Ok(LassoSelection { lambda: grid[best], loo_mse })
}

/// Gaussian-residual predictive: Student-t with the fit's residual variance and
/// `n - active - 1` degrees of freedom (at least 3).
pub fn lasso_predictive_density(fit: &LassoFit, x_new: &[f64]) -> StudentT {
    let dof = (fit.n_rows as f64 - fit.active() as f64 - 1.0).max(3.0);
    StudentT::new(dof, fit.predict(x_new), fit.residual_variance).expect("floored variance")
}
