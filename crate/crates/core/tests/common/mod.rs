//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Static conjugate regression posterior after the first `rows` observations,
/// in `(m, C, n, s)` form with `theta | v ~ N(m, C v / s)`.
#[derive(Debug, Clone)]
pub struct Conjugate {
    pub m: DVector<f64>,
    pub c: DMatrix<f64>,
    pub n: f64,
    pub s: f64,
}

/// Precision-form batch update: `L = s0 C0^-1 + X'X`, `m = L^-1 (s0 C0^-1 m0 + X'y)`,
/// `n s = n0 s0 + y'y + m0' L0 m0 - m' L m`, `C = s L^-1`.
pub fn batch_conjugate(x: &DMatrix<f64>, y: &[f64], rows: usize, m0: &DVector<f64>, c0: &DMatrix<f64>, n0: f64, s0: f64) -> Conjugate {
    let l0 = c0.clone().try_inverse().expect("invertible prior scale") * s0;
    let xs = x.rows(0, rows);
    let ys = DVector::from_column_slice(&y[..rows]);
    let l = &l0 + xs.tr_mul(&xs);
    let l_inv = l.clone().try_inverse().expect("invertible precision");
    let m = &l_inv * (&l0 * m0 + xs.tr_mul(&ys));
    let n = n0 + rows as f64;
    let d = n0 * s0 + ys.dot(&ys) + m0.dot(&(&l0 * m0)) - m.dot(&(&l * &m));
    let s = d / n;
    Conjugate { c: l_inv * s, m, n, s }
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn variance(xs: &[f64]) -> f64 {
    let (mean, _) = mean_and_se(xs);
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Two-sample Kolmogorov-Smirnov test; returns the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1.0f64).powi(k - 1) * (-2.0 * (k as f64 * lambda).powi(2)).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Squared sample correlation by the two-pass formula.
pub fn squared_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab * sab / (saa * sbb)
}

/// Monte-Carlo expected power utility of holding `w` in the risky asset,
/// `None` when some draw wipes out wealth.
pub fn mc_utility(draws: &[f64], w: f64, rf: f64, gamma: f64) -> Option<f64> {
    let mut total = 0.0;
    for y in draws {
        let wealth = rf.exp() * (1.0 + w * (y.exp() - 1.0));
        if wealth <= 0.0 {
            return None;
        }
        total += wealth.powf(1.0 - gamma) / (1.0 - gamma);
    }
    Some(total / draws.len() as f64)
}

/// Exhaustive search over `lower, lower + step, ..., upper`.
pub fn grid_argmax(draws: &[f64], rf: f64, gamma: f64, lower: f64, upper: f64, step: f64) -> Option<f64> {
    let count = ((upper - lower) / step).round() as i64;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=count {
        let w = lower + i as f64 * step;
        if let Some(u) = mc_utility(draws, w, rf, gamma) {
            if best.is_none_or(|(_, b)| u > b) {
                best = Some((w, u));
            }
        }
    }
    best.map(|(w, _)| w)
}

/// Largest lasso KKT violation for `(1/2n)|y - b0 - X b|^2 + lambda |b|_1`.
pub fn lasso_kkt(x: &DMatrix<f64>, y: &[f64], intercept: f64, beta: &DVector<f64>, lambda: f64) -> f64 {
    let n = y.len() as f64;
    let resid = DVector::from_iterator(y.len(), (0..y.len()).map(|i| y[i] - intercept - x.row(i).transpose().dot(beta)));
    let mut worst = resid.sum().abs() / n;
    for j in 0..x.ncols() {
        let g = x.column(j).dot(&resid) / n;
        let v = if beta[j] > 0.0 {
            (g - lambda).abs()
        } else if beta[j] < 0.0 {
            (g + lambda).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Least squares with intercept via the centered normal equations.
pub fn ols(x: &DMatrix<f64>, y: &[f64]) -> (f64, DVector<f64>) {
    let n = y.len() as f64;
    let xm = DVector::from_fn(x.ncols(), |j, _| x.column(j).sum() / n);
    let ym = y.iter().sum::<f64>() / n;
    let mut xc = x.clone();
    for j in 0..x.ncols() {
        xc.column_mut(j).add_scalar_mut(-xm[j]);
    }
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - ym));
    let beta = xc.tr_mul(&xc).cholesky().expect("full rank").solve(&xc.tr_mul(&yc));
    (ym - xm.dot(&beta), beta)
}
