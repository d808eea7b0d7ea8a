use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::ols::{design_matrix, ols_fit};
use super::{CohortTable, Column, StatsError};

/// Hypothesised sign of the independent variable's effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Positive => Direction::Negative,
            Direction::Negative => Direction::Positive,
        }
    }

    pub fn matches(self, coefficient: f64) -> bool {
        match self {
            Direction::Positive => coefficient > 0.0,
            Direction::Negative => coefficient < 0.0,
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "positive" | "pos" | "+" => Ok(Direction::Positive),
            "negative" | "neg" | "-" => Ok(Direction::Negative),
            other => Err(StatsError::BadConfig(format!("unknown direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncovaResult {
    pub f_value: f64,
    pub df1: usize,
    pub df2: usize,
    pub p_one_sided: f64,
    pub p_two_sided: f64,
    pub partial_eta_sq: f64,
    /// Coefficient of the independent variable in the full model.
    pub coefficient: f64,
    pub direction: Direction,
    pub n_used: usize,
}

/// F-test of one independent variable over a covariate-only model.
///
/// Rows missing any of the involved columns are dropped.
pub fn ancova(
    cohort: &CohortTable,
    dependent: Column,
    independent: Column,
    covariates: &[Column],
    direction: Direction,
) -> Result<AncovaResult, StatsError> {
    let mut cols = vec![dependent, independent];
    cols.extend_from_slice(covariates);
    let data = cohort.complete_cases(&cols)?;
    ancova_arrays(&data[0], &data[1], &data[2..], direction)
}

pub fn ancova_arrays(
    y: &[f64],
    x: &[f64],
    covariates: &[Vec<f64>],
    direction: Direction,
) -> Result<AncovaResult, StatsError> {
    let n = y.len();
    if x.len() != n {
        return Err(StatsError::LengthMismatch(n, x.len()));
    }
    if let Some(c) = covariates.iter().find(|c| c.len() != n) {
        return Err(StatsError::LengthMismatch(n, c.len()));
    }
    let p_full = covariates.len() + 2;
    if n < p_full + 1 {
        return Err(StatsError::TooFewObservations {
            n,
            needed: p_full + 1,
        });
    }

    let y_mean = y.iter().sum::<f64>() / n as f64;
    if y.iter().all(|&v| v == y_mean) {
        return Err(StatsError::DegenerateVariance("dependent variable is constant".into()));
    }
    let yv = DVector::from_column_slice(y);
    let mut reduced_cols: Vec<&[f64]> = covariates.iter().map(Vec::as_slice).collect();
    let reduced = match ols_fit(&design_matrix(n, &reduced_cols), &yv) {
        Err(StatsError::RankDeficient { column }) => {
            return Err(StatsError::DegenerateVariance(format!(
                "covariate design is rank deficient at column {column}"
            )))
        }
        other => other?,
    };
    reduced_cols.push(x);
    let full = match ols_fit(&design_matrix(n, &reduced_cols), &yv) {
        Err(StatsError::RankDeficient { .. }) => {
            return Err(StatsError::DegenerateVariance(
                "independent variable is constant or collinear with the covariates".into(),
            ))
        }
        other => other?,
    };

    let ss_error = full.rss;
    let ss_effect = (reduced.rss - full.rss).max(0.0);
    if ss_error + ss_effect == 0.0 {
        return Err(StatsError::DegenerateVariance(
            "dependent variable is fully explained by the covariates".into(),
        ));
    }
    let df1 = 1;
    let df2 = full.df_resid;
    let partial_eta_sq = ss_effect / (ss_effect + ss_error);
    let f_value = if ss_error == 0.0 {
        f64::INFINITY
    } else {
        (ss_effect / df1 as f64) / (ss_error / df2 as f64)
    };
    let p_two_sided = if f_value.is_infinite() {
        0.0
    } else {
        FisherSnedecor::new(df1 as f64, df2 as f64)
            .expect("positive degrees of freedom")
            .sf(f_value)
    };
    let coefficient = full.coefficients[p_full - 1];
    let p_one_sided = if direction.matches(coefficient) {
        p_two_sided / 2.0
    } else {
        1.0 - p_two_sided / 2.0
    };
    Ok(AncovaResult {
        f_value,
        df1,
        df2,
        p_one_sided,
        p_two_sided,
        partial_eta_sq,
        coefficient,
        direction,
        n_used: n,
    })
}

/// F implied by a partial η² at `df1 = 1`.
pub fn f_from_partial_eta_sq(partial_eta_sq: f64, df2: usize) -> f64 {
    partial_eta_sq / (1.0 - partial_eta_sq) * df2 as f64
}
