use super::{BaselineError, VARIANCE_FLOOR};
use crate::density::StudentT;

/// Expanding-mean forecast: location = mean, scale = sample variance, dof = `n - 1`.
pub fn historical_average(history: &[f64]) -> Result<StudentT, BaselineError> {
    let n = history.len();
    if n < 2 {
        return Err(BaselineError::TooFew { needed: 2, got: n });
    }
    let mean = history.iter().sum::<f64>() / n as f64;
    let var = history.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(StudentT::new((n - 1) as f64, mean, var.max(VARIANCE_FLOOR)).expect("positive scale"))
}
