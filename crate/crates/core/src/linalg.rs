//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Lower factor `L` with `L L' = cov`.
///
/// Uses Cholesky; if that fails (semi-definite input such as a zero matrix)
/// falls back to the symmetric eigen square root with negative eigenvalues
/// clipped to zero.
pub fn psd_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(chol) = cov.clone().cholesky() {
        return chol.l();
    }
    let eig = cov.clone().symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals)
}

/// Draw from `N(mean, scale * cov)`.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    scale: f64,
    rng: &mut R,
) -> DVector<f64> {
    let factor = psd_factor(cov);
    let z = DVector::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
    mean + (factor * z) * scale.sqrt()
}

/// Ordinary least squares `argmin |y - X b|` via SVD (rank-tolerant).
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = x.clone().svd(true, true);
    svd.solve(y, 1e-12).ok()
}
