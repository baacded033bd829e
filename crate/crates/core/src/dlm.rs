//! Conjugate dynamic linear regression with discount factors.
//!
//! Model (one time step):
//!
//! ```text
//! y_t     = F_t' theta_t + nu_t,          nu_t ~ N(0, v_t)
//! theta_t = theta_{t-1} + omega_t,        omega_t ~ N(0, v_t W_t)
//! ```
//!
//! `W_t` is implied by the state discount `delta` (prior scale `R_t = C_{t-1} / delta`)
//! and `v_t` follows the beta-gamma random walk with volatility discount `beta`
//! (`n_t = beta n_{t-1} + 1`). The posterior at `t` is normal/inverse-gamma:
//! `theta_t | v_t ~ N(m_t, C_t v_t / s_t)` and `1/v_t ~ G(n_t/2, n_t s_t/2)`.

use crate::data::{SupervisedSlice, YearMonth};
use crate::density::StudentT;
use crate::linalg::{sample_mvn, symmetrize};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum DlmError {
    #[error("discount factors must lie in (0, 1], got state {delta} and volatility {beta}")]
    Discount { delta: f64, beta: f64 },
    #[error("invalid posterior: {0}")]
    Posterior(String),
    #[error("regressor dimension {found} does not match state dimension {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("non-positive forecast variance q = {0} (state scale matrix lost positive definiteness)")]
    NonPositiveVariance(f64),
    #[error("non-finite target value {0}")]
    NonFiniteTarget(f64),
    #[error("empty design")]
    Empty,
    #[error("at {date}: {source}")]
    AtDate {
        date: YearMonth,
        #[source]
        source: Box<DlmError>,
    },
}

/// Twin discount factors: `delta` for the state, `beta` for the volatility.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiscountConfig {
    delta: f64,
    beta: f64,
}

impl DiscountConfig {
    pub fn new(delta: f64, beta: f64) -> Result<Self, DlmError> {
        let ok = |x: f64| x > 0.0 && x <= 1.0;
        if ok(delta) && ok(beta) {
            Ok(Self { delta, beta })
        } else {
            Err(DlmError::Discount { delta, beta })
        }
    }

    /// No discounting: static regression with constant volatility.
    pub fn static_model() -> Self {
        Self { delta: 1.0, beta: 1.0 }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Discounts plus the `(n_0, s_0)` prior used to start a filter with `C_0 = I`, `m_0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSettings {
    pub delta: f64,
    pub beta: f64,
    pub n0: f64,
    pub s0: f64,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self { delta: 0.99, beta: 0.95, n0: 10.0, s0: 0.01 }
    }
}

impl FilterSettings {
    pub fn discount(&self) -> Result<DiscountConfig, DlmError> {
        DiscountConfig::new(self.delta, self.beta)
    }

    pub fn prior(&self, dim: usize) -> Result<DlmPosterior, DlmError> {
        DlmPosterior::default_prior(dim, self.n0, self.s0)
    }
}

/// Normal/inverse-gamma summary `(m, C, n, s)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DlmPosterior {
    pub mean: DVector<f64>,
    pub scale: DMatrix<f64>,
    pub dof: f64,
    pub vol: f64,
    pub time: usize,
}

impl DlmPosterior {
    pub fn new(mean: DVector<f64>, scale: DMatrix<f64>, dof: f64, vol: f64) -> Result<Self, DlmError> {
        let p = mean.len();
        if p == 0 || scale.nrows() != p || scale.ncols() != p {
            return Err(DlmError::Posterior(format!(
                "mean of length {p} with a {}x{} scale matrix",
                scale.nrows(),
                scale.ncols()
            )));
        }
        if !(dof > 0.0) || !(vol > 0.0) || !dof.is_finite() || !vol.is_finite() {
            return Err(DlmError::Posterior(format!("dof {dof} and volatility {vol} must be positive")));
        }
        if scale.clone().cholesky().is_none() {
            return Err(DlmError::Posterior("scale matrix is not positive definite".to_string()));
        }
        Ok(Self { mean, scale, dof, vol, time: 0 })
    }

    /// `m_0 = 0`, `C_0 = I`, so `theta_0 | v_0 ~ N(0, (v_0 / s_0) I)`.
    pub fn default_prior(dim: usize, n0: f64, s0: f64) -> Result<Self, DlmError> {
        Self::new(DVector::zeros(dim), DMatrix::identity(dim, dim), n0, s0)
    }

    pub fn with_mean(mut self, mean: DVector<f64>) -> Result<Self, DlmError> {
        if mean.len() != self.dim() {
            return Err(DlmError::Dimension { expected: self.dim(), found: mean.len() });
        }
        self.mean = mean;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `k`-step-ahead Student-t forecast for regressors `f` from this posterior,
    /// without intermediate observations: `R = C / delta^k`, `q = f'Rf + s`,
    /// dof `beta^k n`. For `k = 1` this is the pre-observation density of
    /// [`filter_step`].
    pub fn forecast(&self, f: &DVector<f64>, k: usize, disc: &DiscountConfig) -> Result<StudentT, DlmError> {
        self.check_dim(f)?;
        let k = k.max(1) as i32;
        let r = &self.scale / disc.delta.powi(k);
        let q = f.dot(&(r * f)) + self.vol;
        if !(q > 0.0) || !q.is_finite() {
            return Err(DlmError::NonPositiveVariance(q));
        }
        let dof = disc.beta.powi(k) * self.dof;
        Ok(StudentT::new(dof, f.dot(&self.mean), q).expect("positive q and dof"))
    }

    fn check_dim(&self, f: &DVector<f64>) -> Result<(), DlmError> {
        if f.len() != self.dim() {
            return Err(DlmError::Dimension { expected: self.dim(), found: f.len() });
        }
        Ok(())
    }
}

/// Result of one filtering update.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStep {
    pub posterior: DlmPosterior,
    /// Pre-observation 1-step forecast `T_{beta n}(f, q)`.
    pub forecast: StudentT,
    /// Forecast error `e = y - f`.
    pub error: f64,
}

/// One forward-filtering update `(m, C, n, s)_{t-1} -> (m, C, n, s)_t`.
pub fn filter_step(
    post: &DlmPosterior,
    f: &DVector<f64>,
    y: f64,
    disc: &DiscountConfig,
) -> Result<FilterStep, DlmError> {
    post.check_dim(f)?;
    if !y.is_finite() {
        return Err(DlmError::NonFiniteTarget(y));
    }
    let r = &post.scale / disc.delta;
    let rf = &r * f;
    let f_mean = f.dot(&post.mean);
    let q = f.dot(&rf) + post.vol;
    if !(q > 0.0) || !q.is_finite() {
        return Err(DlmError::NonPositiveVariance(q));
    }
    let e = y - f_mean;
    let gain = rf / q;
    let prior_dof = disc.beta * post.dof;
    let dof = prior_dof + 1.0;
    let ratio = (prior_dof + e * e / q) / dof;
    let mean = &post.mean + &gain * e;
    let mut scale = (r - (&gain * gain.transpose()) * q) * ratio;
    symmetrize(&mut scale);
    Ok(FilterStep {
        posterior: DlmPosterior { mean, scale, dof, vol: ratio * post.vol, time: post.time + 1 },
        forecast: StudentT::new(prior_dof, f_mean, q).expect("positive q and dof"),
        error: e,
    })
}

/// One filtered time point: the forecast made before seeing `y_t` and the
/// posterior after it.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredPoint {
    pub date: YearMonth,
    pub forecast: StudentT,
    pub posterior: DlmPosterior,
}

/// Run [`filter_step`] over every row of `slice`, starting from `prior`.
pub fn run_expanding_filter(
    slice: &SupervisedSlice,
    prior: &DlmPosterior,
    disc: &DiscountConfig,
) -> Result<Vec<FilteredPoint>, DlmError> {
    if slice.is_empty() {
        return Err(DlmError::Empty);
    }
    let mut post = prior.clone();
    let mut out = Vec::with_capacity(slice.len());
    for row in 0..slice.len() {
        let date = slice.dates[row];
        let step = filter_step(&post, &slice.regressors(row), slice.target[row], disc)
            .map_err(|e| DlmError::AtDate { date, source: Box::new(e) })?;
        post = step.posterior;
        out.push(FilteredPoint { date, forecast: step.forecast, posterior: post.clone() });
    }
    Ok(out)
}

/// Forecast densities for every row of a lag-`k` slice without look-ahead:
/// row `i` (target date `d`) is forecast from the posterior that has seen only
/// targets dated up to `d - k`, with `R = C / delta^k` and dof `beta^k n`.
/// For `k = 1` these are the filter's own 1-step densities.
pub fn k_step_densities(
    slice: &SupervisedSlice,
    prior: &DlmPosterior,
    disc: &DiscountConfig,
) -> Result<Vec<StudentT>, DlmError> {
    let k = slice.horizon.max(1);
    let filtered = run_expanding_filter(slice, prior, disc)?;
    (0..slice.len())
        .map(|i| {
            let post = if i >= k { &filtered[i - k].posterior } else { prior };
            post.forecast(&slice.regressors(i), k, disc)
                .map_err(|e| DlmError::AtDate { date: slice.dates[i], source: Box::new(e) })
        })
        .collect()
}

/// Joint draw `(theta_t, v_t)` from the normal/inverse-gamma posterior.
pub fn sample_posterior<R: Rng + ?Sized>(post: &DlmPosterior, rng: &mut R) -> (DVector<f64>, f64) {
    let precision = Gamma::new(0.5 * post.dof, 2.0 / (post.dof * post.vol))
        .expect("posterior dof and vol are positive")
        .sample(rng);
    let v = 1.0 / precision;
    let theta = sample_mvn(&post.mean, &post.scale, v / post.vol, rng);
    (theta, v)
}

/// Evolve a draw one step: `v' = v beta / gamma` with
/// `gamma ~ Beta(beta n / 2, (1 - beta) n / 2)`, then
/// `theta' = theta + omega`, `omega ~ N(0, v' C (1/delta - 1) / s)`.
///
/// `post` supplies `(C, n, s)` of the time the draw belongs to. `beta = 1`
/// and `delta = 1` are exact degenerate limits (no randomness consumed).
pub fn evolve<R: Rng + ?Sized>(
    theta: &DVector<f64>,
    v: f64,
    post: &DlmPosterior,
    disc: &DiscountConfig,
    rng: &mut R,
) -> (DVector<f64>, f64) {
    let v_next = if disc.beta < 1.0 {
        let g = Beta::new(0.5 * disc.beta * post.dof, 0.5 * (1.0 - disc.beta) * post.dof)
            .expect("beta shape parameters are positive")
            .sample(rng);
        v * disc.beta / g
    } else {
        v
    };
    let theta_next = if disc.delta < 1.0 {
        let w_scale = (1.0 / disc.delta - 1.0) * v_next / post.vol;
        sample_mvn(theta, &post.scale, w_scale, rng)
    } else {
        theta.clone()
    };
    (theta_next, v_next)
}

/// Draw `(theta_{t+1}, v_{t+1})` given the time-`t` posterior.
pub fn sample_evolution<R: Rng + ?Sized>(
    post: &DlmPosterior,
    disc: &DiscountConfig,
    rng: &mut R,
) -> (DVector<f64>, f64) {
    let (theta, v) = sample_posterior(post, rng);
    evolve(&theta, v, post, disc, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_post(m: f64, c: f64, n: f64, s: f64) -> DlmPosterior {
        DlmPosterior::new(DVector::from_element(1, m), DMatrix::from_element(1, 1, c), n, s).unwrap()
    }

    #[test]
    fn discount_bounds() {
        assert!(DiscountConfig::new(0.0, 0.5).is_err());
        assert!(DiscountConfig::new(0.5, 1.01).is_err());
        assert!(DiscountConfig::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn zero_error_keeps_location() {
        let post = scalar_post(0.3, 2.0, 5.0, 0.5);
        let disc = DiscountConfig::new(0.9, 0.95).unwrap();
        let f = DVector::from_element(1, 2.0);
        let step = filter_step(&post, &f, 0.6, &disc).unwrap();
        assert_eq!(step.error, 0.0);
        assert_eq!(step.posterior.mean, post.mean);
    }

    #[test]
    fn dof_grows_by_one_without_volatility_discount() {
        let disc = DiscountConfig::new(0.95, 1.0).unwrap();
        let mut post = scalar_post(0.0, 1.0, 3.0, 1.0);
        let f = DVector::from_element(1, 1.0);
        for t in 0..25 {
            post = filter_step(&post, &f, (t as f64).sin(), &disc).unwrap().posterior;
        }
        assert_eq!(post.dof, 28.0);
        assert_eq!(post.time, 25);
    }

    #[test]
    fn dimension_mismatch() {
        let post = scalar_post(0.0, 1.0, 1.0, 1.0);
        let f = DVector::from_element(2, 1.0);
        assert_eq!(
            filter_step(&post, &f, 0.0, &DiscountConfig::static_model()).unwrap_err(),
            DlmError::Dimension { expected: 1, found: 2 }
        );
    }

    #[test]
    fn broken_scale_is_a_hard_error() {
        let mut post = scalar_post(0.0, 1.0, 1.0, 1.0);
        post.scale[(0, 0)] = -5.0;
        let f = DVector::from_element(1, 1.0);
        assert!(matches!(
            filter_step(&post, &f, 0.0, &DiscountConfig::static_model()),
            Err(DlmError::NonPositiveVariance(_))
        ));
    }

    #[test]
    fn scale_stays_positive_definite_on_collinear_regressors() {
        let disc = DiscountConfig::new(0.99, 0.95).unwrap();
        let mut post = DlmPosterior::default_prior(3, 10.0, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let a: f64 = rng.random_range(-1.0..1.0);
            let f = DVector::from_vec(vec![1.0, a, 2.0 * a + 1e-6 * rng.random::<f64>()]);
            post = filter_step(&post, &f, a + 0.1 * rng.random::<f64>(), &disc).unwrap().posterior;
            assert!(min_eigenvalue(&post.scale) > 0.0);
        }
    }

    #[test]
    fn one_step_forecast_matches_filter_density() {
        let post = DlmPosterior::default_prior(2, 10.0, 0.01).unwrap();
        let disc = DiscountConfig::new(0.97, 0.9).unwrap();
        let f = DVector::from_vec(vec![1.0, 0.4]);
        let step = filter_step(&post, &f, 1.0, &disc).unwrap();
        assert_eq!(post.forecast(&f, 1, &disc).unwrap(), step.forecast);
        let three = post.forecast(&f, 3, &disc).unwrap();
        assert!(three.scale() > step.forecast.scale());
    }

    fn ramp_slice(k: usize, y: Vec<f64>) -> SupervisedSlice {
        let n = y.len();
        let dates: Vec<YearMonth> = (0..n).map(|i| YearMonth::new(2000, 1).unwrap().add_months(i as i64)).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let panel = crate::data::TimeSeriesPanel::new(dates, "y", y, vec!["x".into()], vec![x], None).unwrap();
        crate::data::build_design(&panel, "g", &[0], k, true).unwrap()
    }

    #[test]
    fn one_step_densities_are_filter_forecasts() {
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).sin()).collect();
        let slice = ramp_slice(1, y);
        let prior = DlmPosterior::default_prior(2, 10.0, 0.01).unwrap();
        let disc = DiscountConfig::new(0.98, 0.95).unwrap();
        let filtered = run_expanding_filter(&slice, &prior, &disc).unwrap();
        let dens = k_step_densities(&slice, &prior, &disc).unwrap();
        for (d, f) in dens.iter().zip(&filtered) {
            assert_eq!(*d, f.forecast);
        }
    }

    #[test]
    fn k_step_densities_ignore_the_last_k_targets() {
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).sin()).collect();
        let prior = DlmPosterior::default_prior(2, 10.0, 0.01).unwrap();
        let disc = DiscountConfig::new(0.98, 0.95).unwrap();
        let k = 3;
        let base = k_step_densities(&ramp_slice(k, y.clone()), &prior, &disc).unwrap();
        // slice row i has target index i + k; perturb targets of rows i - k + 1 ..= i
        let i = 15;
        let mut bumped = y.clone();
        for r in (i - k + 1)..=i {
            bumped[r + k] += 10.0;
        }
        let moved = k_step_densities(&ramp_slice(k, bumped), &prior, &disc).unwrap();
        assert_eq!(base[i], moved[i]);
        assert_ne!(base[i + 1], moved[i + 1]);
    }

    #[test]
    fn degenerate_evolution_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let post = scalar_post(1.0, 0.5, 10.0, 0.2);
        let theta = DVector::from_element(1, 0.7);
        let (t1, v1) = evolve(&theta, 0.3, &post, &DiscountConfig::static_model(), &mut rng);
        assert_eq!(t1, theta);
        assert_eq!(v1, 0.3);
        let (t2, v2) = evolve(&theta, 0.3, &post, &DiscountConfig::new(1.0, 0.9).unwrap(), &mut rng);
        assert_eq!(t2, theta);
        assert_ne!(v2, 0.3);
        let (t3, v3) = evolve(&theta, 0.3, &post, &DiscountConfig::new(0.9, 1.0).unwrap(), &mut rng);
        assert_ne!(t3, theta);
        assert_eq!(v3, 0.3);
    }

    #[test]
    fn evolution_is_deterministic_under_seed() {
        let post = DlmPosterior::default_prior(2, 10.0, 0.01).unwrap();
        let disc = DiscountConfig::new(0.95, 0.95).unwrap();
        let a = sample_evolution(&post, &disc, &mut ChaCha8Rng::seed_from_u64(5));
        let b = sample_evolution(&post, &disc, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }
}
