use crate::density::{log_sum_exp, StudentT};
use rand::Rng;

/// Finite mixture of Student-t densities with non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPool {
    weights: Vec<f64>,
    components: Vec<StudentT>,
}

impl LinearPool {
    pub fn equal(components: Vec<StudentT>) -> Self {
        let w = 1.0 / components.len() as f64;
        Self { weights: vec![w; components.len()], components }
    }

    /// `weights` must be non-negative with unit sum and match `components`.
    pub fn weighted(weights: Vec<f64>, components: Vec<StudentT>) -> Self {
        assert_eq!(weights.len(), components.len());
        Self { weights, components }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[StudentT] {
        &self.components
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.components).map(|(w, c)| w * c.mean()).sum()
    }

    pub fn ln_pdf(&self, y: f64) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, c)| w.ln() + c.ln_pdf(y))
            .collect();
        log_sum_exp(&terms)
    }

    /// Pick a component by weight, then draw from it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, c) in self.weights.iter().zip(&self.components) {
            acc += w;
            if u < acc {
                return c.sample(rng);
            }
        }
        self.components.last().expect("non-empty pool").sample(rng)
    }
}

/// Equal-weight linear pool of `densities` and its log score at `y`.
pub fn equal_weight_pool(densities: &[StudentT], y: f64) -> (f64, LinearPool) {
    let pool = LinearPool::equal(densities.to_vec());
    (pool.ln_pdf(y), pool)
}
