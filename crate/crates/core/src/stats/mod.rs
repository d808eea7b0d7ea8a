//! Statistical inference on cohort tables: least squares, ANCOVA with
//! partial η², Spearman correlation, bootstrap/permutation mediation and
//! leave-one-out prediction from a single feature.

mod ancova;
mod cohort;
mod loocv;
mod mediation;
mod ols;
mod rank;

pub use ancova::{ancova, ancova_arrays, f_from_partial_eta_sq, AncovaResult, Direction};
pub use cohort::{CohortRecord, CohortTable, Column};
pub use loocv::{loocv_linear, loocv_single_feature, signed_r2_percent, LoocvResult};
pub use mediation::{mediate, mediate_arrays, MediationConfig, MediationResult, PathEstimate};
pub use ols::{design_matrix, ols_fit, OlsFit};
pub use rank::{ks_uniform, pearson, ranks, spearman};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {n}")]
    TooFewObservations { n: usize, needed: usize },
    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("input is constant; {0} undefined")]
    ConstantInput(&'static str),
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),
    #[error("column {0} is not present for any row")]
    MissingColumn(String),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("resampling kept producing rank-deficient draws ({attempts} redraws)")]
    ResampleDegenerate { attempts: usize },
    #[error("invalid cohort row {row}: {reason}")]
    InvalidCohort { row: usize, reason: String },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
