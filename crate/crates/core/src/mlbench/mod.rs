//! Nested leave-one-out benchmark of regression pipelines.
//!
//! A pipeline is a fixed chain `variance threshold → mean impute → robust
//! scale → transform → estimator`. Each [`PipelineSpec`] carries a
//! hyperparameter grid; inside every outer fold the grid is searched with an
//! inner leave-one-out loop on the training subjects only, selecting by mean
//! absolute error.

mod benchmark;
mod estimator;
mod pipeline;
mod transform;
mod tree;

pub use benchmark::{
    load_specs, read_feature_csv, run_benchmark, BenchmarkRow, BenchmarkTable, BestRow, FeatureSet,
    SingleFeatureRow, Target,
};
pub use estimator::{EstimatorGrid, EstimatorStep};
pub use pipeline::{
    default_space, run_fold, run_pipeline, BenchmarkResult, Config, FittedPipeline, FoldResult,
    PipelineSpec,
};
pub use transform::{Preprocessing, TransformGrid, TransformStep};

use thiserror::Error;

use crate::stats::StatsError;

#[derive(Debug, Error)]
pub enum MlError {
    #[error("need at least {needed} subjects, got {n}")]
    TooFewSubjects { n: usize, needed: usize },
    #[error("feature matrix has no usable features")]
    NoFeatures,
    #[error("invalid pipeline spec {name:?}: {reason}")]
    InvalidSpec { name: String, reason: String },
    #[error("target is constant in the training set of fold {held}")]
    DegenerateFold { held: usize },
    #[error("feature matrix contains missing values and mean imputation is disabled")]
    MissingValues,
    #[error("subject ids of {modality:?} disagree with the target at row {row}")]
    Misaligned { modality: String, row: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
