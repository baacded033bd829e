//! Predictive density types shared by every model.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

/// Degrees of freedom above which the Student-t is evaluated as its normal limit.
const NORMAL_LIMIT_DOF: f64 = 1e8;

/// Location/scale Student-t density `T_dof(location, scale)`.
///
/// `scale` is the squared-scale (variance multiplier) convention used by the
/// conjugate DLM recursions: the variance is `scale * dof / (dof - 2)`.
/// A zero scale denotes a point mass at `location`; it is only constructible
/// through [`StudentT::point_mass`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentT {
    dof: f64,
    location: f64,
    scale: f64,
}

impl StudentT {
    /// Returns `None` unless `dof > 0`, `scale > 0` and all values are finite.
    pub fn new(dof: f64, location: f64, scale: f64) -> Option<Self> {
        if dof > 0.0 && scale > 0.0 && location.is_finite() && scale.is_finite() && !dof.is_nan() {
            Some(Self { dof, location, scale })
        } else {
            None
        }
    }

    pub fn point_mass(location: f64) -> Self {
        Self { dof: f64::INFINITY, location, scale: 0.0 }
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_point_mass(&self) -> bool {
        self.scale == 0.0
    }

    /// Mean (the location; the caller decides whether `dof > 1` matters).
    pub fn mean(&self) -> f64 {
        self.location
    }

    pub fn variance(&self) -> f64 {
        if self.is_point_mass() {
            0.0
        } else if self.dof > 2.0 {
            if self.dof.is_infinite() {
                self.scale
            } else {
                self.scale * self.dof / (self.dof - 2.0)
            }
        } else {
            f64::INFINITY
        }
    }

    pub fn ln_pdf(&self, y: f64) -> f64 {
        if self.is_point_mass() {
            return if y == self.location { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        let z2 = (y - self.location).powi(2) / self.scale;
        if self.dof > NORMAL_LIMIT_DOF {
            return -0.5 * ((2.0 * PI * self.scale).ln() + z2);
        }
        let nu = self.dof;
        ln_gamma(0.5 * (nu + 1.0))
            - ln_gamma(0.5 * nu)
            - 0.5 * (nu * PI * self.scale).ln()
            - 0.5 * (nu + 1.0) * (z2 / nu).ln_1p()
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.ln_pdf(y).exp()
    }

    /// Draw one value. Point masses return their location without consuming randomness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.is_point_mass() {
            return self.location;
        }
        let z: f64 = StandardNormal.sample(rng);
        if self.dof > NORMAL_LIMIT_DOF {
            return self.location + self.scale.sqrt() * z;
        }
        let chi2 = rand_distr::ChiSquared::new(self.dof)
            .expect("dof validated positive")
            .sample(rng);
        self.location + self.scale.sqrt() * z / (chi2 / self.dof).sqrt()
    }
}

/// Equally weighted mixture of normal components `N(mean_i, var_i)`.
///
/// This is the Rao-Blackwellized form of a simulated predictive: each saved
/// posterior draw contributes one conditional normal.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl GaussianMixture {
    /// Returns `None` when empty, lengths differ, or a variance is not strictly positive.
    pub fn new(means: Vec<f64>, variances: Vec<f64>) -> Option<Self> {
        if means.is_empty()
            || means.len() != variances.len()
            || variances.iter().any(|v| !(*v > 0.0) || !v.is_finite())
            || means.iter().any(|m| !m.is_finite())
        {
            return None;
        }
        Some(Self { means, variances })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn mean(&self) -> f64 {
        self.means.iter().sum::<f64>() / self.means.len() as f64
    }

    pub fn ln_pdf(&self, y: f64) -> f64 {
        let terms: Vec<f64> = self
            .means
            .iter()
            .zip(&self.variances)
            .map(|(m, v)| -0.5 * ((2.0 * PI * v).ln() + (y - m).powi(2) / v))
            .collect();
        log_mean_exp(&terms)
    }

    /// Draw a component uniformly, then from that component.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let i = rng.random_range(0..self.means.len());
        let z: f64 = StandardNormal.sample(rng);
        self.means[i] + self.variances[i].sqrt() * z
    }
}

/// `log(sum(exp(x)))`, stable for large magnitudes; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}
