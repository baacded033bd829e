use super::EvalError;
use crate::linalg::least_squares;
use nalgebra::{DMatrix, DVector};

const MIN_DRAWS: usize = 10;

/// Per-time R² values; `degenerate` lists times where the regressand had no
/// spread across draws (reported as 0).
#[derive(Debug, Clone, PartialEq)]
pub struct R2Series {
    pub values: Vec<f64>,
    pub degenerate: Vec<usize>,
}

/// `draws[i]` is the `T x J` matrix of latent states from saved iteration `i`.
fn check(draws: &[DMatrix<f64>], cols: &[usize]) -> Result<(usize, usize), EvalError> {
    if draws.len() < MIN_DRAWS {
        return Err(EvalError::TooFewDraws { needed: MIN_DRAWS, got: draws.len() });
    }
    let (t_len, j) = draws[0].shape();
    if draws.iter().any(|d| d.shape() != (t_len, j)) {
        return Err(EvalError::Shape("latent draws differ in shape".into()));
    }
    if j < 2 {
        return Err(EvalError::Shape("R² needs at least two groups".into()));
    }
    if let Some(c) = cols.iter().find(|c| **c >= j) {
        return Err(EvalError::Shape(format!("group index {c} out of range for {j} groups")));
    }
    Ok((t_len, j))
}

fn centered(values: impl Iterator<Item = f64>) -> DVector<f64> {
    let v: Vec<f64> = values.collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    DVector::from_iterator(v.len(), v.into_iter().map(|x| x - mean))
}

/// R² of regressing group `j`'s draws on every other group's draws (with
/// intercept), separately at each time.
pub fn mc_r2_full(draws: &[DMatrix<f64>], j: usize) -> Result<R2Series, EvalError> {
    let (t_len, groups) = check(draws, &[j])?;
    let others: Vec<usize> = (0..groups).filter(|&g| g != j).collect();
    let mut out = R2Series { values: Vec::with_capacity(t_len), degenerate: Vec::new() };
    for t in 0..t_len {
        let y = centered(draws.iter().map(|d| d[(t, j)]));
        let tss = y.norm_squared();
        if !(tss > 0.0) {
            out.values.push(0.0);
            out.degenerate.push(t);
            continue;
        }
        let mut x = DMatrix::zeros(draws.len(), others.len());
        for (c, &g) in others.iter().enumerate() {
            x.set_column(c, &centered(draws.iter().map(|d| d[(t, g)])));
        }
        let beta = least_squares(&x, &y).ok_or_else(|| EvalError::Shape("least squares failed".into()))?;
        let rss = (&y - &x * beta).norm_squared();
        out.values.push((1.0 - rss / tss).clamp(0.0, 1.0));
    }
    Ok(out)
}

/// Squared empirical correlation between groups `j` and `q` at each time.
pub fn mc_r2_pairwise(draws: &[DMatrix<f64>], j: usize, q: usize) -> Result<R2Series, EvalError> {
    let (t_len, _) = check(draws, &[j, q])?;
    let mut out = R2Series { values: Vec::with_capacity(t_len), degenerate: Vec::new() };
    for t in 0..t_len {
        let a = centered(draws.iter().map(|d| d[(t, j)]));
        let b = centered(draws.iter().map(|d| d[(t, q)]));
        let (va, vb) = (a.norm_squared(), b.norm_squared());
        if !(va > 0.0) || !(vb > 0.0) {
            out.values.push(0.0);
            out.degenerate.push(t);
            continue;
        }
        let cov = a.dot(&b);
        out.values.push((cov * cov / (va * vb)).clamp(0.0, 1.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_draws(n: usize, t_len: usize, j: usize, seed: u64) -> Vec<DMatrix<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| DMatrix::from_fn(t_len, j, |_, _| StandardNormal.sample(&mut rng))).collect()
    }

    #[test]
    fn duplicated_group_explains_everything() {
        let mut d = random_draws(50, 3, 3, 1);
        for m in d.iter_mut() {
            let c = m.column(0).clone_owned();
            m.set_column(2, &c);
        }
        assert!(mc_r2_full(&d, 0).unwrap().values.iter().all(|r| (r - 1.0).abs() < 1e-12));
        assert!(mc_r2_pairwise(&d, 0, 2).unwrap().values.iter().all(|r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn single_regressor_full_equals_pairwise() {
        let d = random_draws(40, 4, 2, 2);
        let full = mc_r2_full(&d, 0).unwrap().values;
        let pair = mc_r2_pairwise(&d, 0, 1).unwrap().values;
        for (a, b) in full.iter().zip(&pair) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_regressand_is_flagged() {
        let mut d = random_draws(20, 2, 2, 3);
        for m in d.iter_mut() {
            m[(1, 0)] = 4.0;
        }
        let r = mc_r2_full(&d, 0).unwrap();
        assert_eq!(r.degenerate, vec![1]);
        assert_eq!(r.values[1], 0.0);
    }

    #[test]
    fn too_few_draws() {
        let d = random_draws(5, 2, 2, 4);
        assert!(matches!(mc_r2_full(&d, 0), Err(EvalError::TooFewDraws { .. })));
    }
}
