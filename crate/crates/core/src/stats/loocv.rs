use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ols::{design_matrix, ols_fit};
use super::rank::spearman;
use super::{CohortTable, Column, StatsError};

/// `sign(ρ) · ρ² · 100`: variance explained in percent, negative when the
/// predictions are anticorrelated with the truth.
pub fn signed_r2_percent(rho: f64) -> f64 {
    rho.signum() * rho * rho * 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvResult {
    pub predictions: Vec<f64>,
    pub truths: Vec<f64>,
    pub rho: f64,
    pub variance_explained: f64,
}

/// Leave-one-out predictions of `y` from a simple linear regression on `x`.
pub fn loocv_linear(x: &[f64], y: &[f64]) -> Result<LoocvResult, StatsError> {
    let n = x.len();
    if y.len() != n {
        return Err(StatsError::LengthMismatch(n, y.len()));
    }
    if n < 3 {
        return Err(StatsError::TooFewObservations { n, needed: 3 });
    }
    let mut predictions = Vec::with_capacity(n);
    for held in 0..n {
        let xt: Vec<f64> = (0..n).filter(|&i| i != held).map(|i| x[i]).collect();
        let yt: Vec<f64> = (0..n).filter(|&i| i != held).map(|i| y[i]).collect();
        let fit = match ols_fit(&design_matrix(xt.len(), &[&xt]), &DVector::from_vec(yt)) {
            Err(StatsError::RankDeficient { .. }) => {
                return Err(StatsError::ConstantInput("single-feature regression"))
            }
            other => other?,
        };
        predictions.push(fit.coefficients[0] + fit.coefficients[1] * x[held]);
    }
    let rho = spearman(&predictions, y)?;
    Ok(LoocvResult {
        predictions,
        truths: y.to_vec(),
        rho,
        variance_explained: signed_r2_percent(rho),
    })
}

pub fn loocv_single_feature(
    cohort: &CohortTable,
    feature: Column,
    target: Column,
) -> Result<LoocvResult, StatsError> {
    let data = cohort.complete_cases(&[feature, target])?;
    loocv_linear(&data[0], &data[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_linear_target() {
        let x: Vec<f64> = (0..12).map(|i| f64::from(i) * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| 5.0 - 2.0 * v).collect();
        let r = loocv_linear(&x, &y).unwrap();
        assert_abs_diff_eq!(r.variance_explained, 100.0, epsilon = 1e-9);
        for (p, t) in r.predictions.iter().zip(&y) {
            assert_abs_diff_eq!(p, t, epsilon = 1e-10);
        }
    }

    #[test]
    fn sign_preserved() {
        assert_eq!(signed_r2_percent(-0.5), -25.0);
        assert_eq!(signed_r2_percent(0.5), 25.0);
    }

    #[test]
    fn constant_feature_rejected() {
        let x = vec![1.0; 6];
        let y: Vec<f64> = (0..6).map(f64::from).collect();
        assert!(matches!(
            loocv_linear(&x, &y),
            Err(StatsError::ConstantInput(_))
        ));
    }
}
