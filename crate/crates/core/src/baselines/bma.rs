use super::{BaselineError, LinearPool};
use crate::density::{log_sum_exp, StudentT};

/// Sequential model probabilities, kept as cumulative log likelihoods so long
/// runs cannot underflow.
#[derive(Debug, Clone, PartialEq)]
pub struct BmaState {
    log_lik: Vec<f64>,
    weights: Vec<f64>,
}

impl BmaState {
    /// Uniform prior over `j` models.
    pub fn uniform(j: usize) -> Self {
        Self { log_lik: vec![0.0; j], weights: vec![1.0 / j as f64; j] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_likelihoods(&self) -> &[f64] {
        &self.log_lik
    }

    /// Predictive mixture under the current weights.
    pub fn pool(&self, densities: &[StudentT]) -> LinearPool {
        LinearPool::weighted(self.weights.clone(), densities.to_vec())
    }
}

/// Score `y` under the current mixture, then update `w_j ∝ w_j h_j(y)`.
pub fn bma_step(state: &BmaState, densities: &[StudentT], y: f64) -> Result<(BmaState, f64), BaselineError> {
    if densities.len() != state.weights.len() {
        return Err(BaselineError::Shape(format!(
            "{} densities for {} models",
            densities.len(),
            state.weights.len()
        )));
    }
    let score = state.pool(densities).ln_pdf(y);
    let log_lik: Vec<f64> = state.log_lik.iter().zip(densities).map(|(l, d)| l + d.ln_pdf(y)).collect();
    let norm = log_sum_exp(&log_lik);
    if !norm.is_finite() {
        return Err(BaselineError::ZeroMass);
    }
    let weights = log_lik.iter().map(|l| (l - norm).exp()).collect();
    Ok((BmaState { log_lik, weights }, score))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_likelihoods_stay_uniform() {
        let d = StudentT::new(5.0, 0.0, 1.0).unwrap();
        let mut s = BmaState::uniform(3);
        for y in [0.1, -0.4, 2.0] {
            s = bma_step(&s, &[d, d, d], y).unwrap().0;
        }
        assert!(s.weights().iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn likelihood_ratio_two_doubles_the_odds() {
        // uniform densities on a scale where model 1 has twice the density at 0
        let a = StudentT::new(f64::INFINITY, 0.0, 1.0).unwrap();
        let b = StudentT::new(f64::INFINITY, 0.0, 4.0).unwrap();
        let mut s = BmaState::uniform(2);
        for step in 1..=5 {
            s = bma_step(&s, &[a, b], 0.0).unwrap().0;
            let ratio = s.weights()[0] / s.weights()[1];
            assert!((ratio - 2f64.powi(step)).abs() < 1e-9 * ratio);
        }
    }

    #[test]
    fn score_uses_prior_weights() {
        let a = StudentT::new(6.0, 0.0, 1.0).unwrap();
        let b = StudentT::new(6.0, 3.0, 1.0).unwrap();
        let s = BmaState::uniform(2);
        let (_, score) = bma_step(&s, &[a, b], 0.5).unwrap();
        let direct = (0.5 * a.pdf(0.5) + 0.5 * b.pdf(0.5)).ln();
        assert!((score - direct).abs() < 1e-12);
    }

    #[test]
    fn point_masses_missing_everywhere_is_an_error() {
        let s = BmaState::uniform(1);
        assert_eq!(bma_step(&s, &[StudentT::point_mass(1.0)], 0.0), Err(BaselineError::ZeroMass));
    }
}
