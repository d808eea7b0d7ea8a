use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimator::{EstimatorGrid, EstimatorStep, FittedEstimator};
use super::transform::{FittedPreprocessing, FittedTransform, Preprocessing, TransformGrid, TransformStep};
use super::MlError;
use crate::stats::{signed_r2_percent, spearman, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub name: String,
    #[serde(default)]
    pub preprocessing: Preprocessing,
    pub transform: TransformGrid,
    pub estimator: EstimatorGrid,
    /// Seeds the bagged-tree bootstrap streams.
    #[serde(default)]
    pub seed: u64,
}

/// One point of a pipeline's hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub transform: TransformStep,
    pub estimator: EstimatorStep,
}

impl PipelineSpec {
    pub fn new(name: impl Into<String>, transform: TransformGrid, estimator: EstimatorGrid) -> Self {
        Self {
            name: name.into(),
            preprocessing: Preprocessing::default(),
            transform,
            estimator,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), MlError> {
        self.transform
            .validate()
            .and_then(|_| self.estimator.validate())
            .map_err(|reason| MlError::InvalidSpec {
                name: self.name.clone(),
                reason,
            })
    }

    /// Transform parameters × estimator parameters, transform-major.
    pub fn grid(&self) -> Vec<Config> {
        let estimators = self.estimator.steps();
        self.transform
            .steps()
            .into_iter()
            .flat_map(|t| {
                estimators.iter().map(move |&e| Config {
                    transform: t,
                    estimator: e,
                })
            })
            .collect()
    }
}

/// The enumerated pipeline space: {identity, PCA, percentile selection} ×
/// {least squares, ridge, bagged trees}.
pub fn default_space(seed: u64) -> Vec<PipelineSpec> {
    let transforms = [
        TransformGrid::Identity,
        TransformGrid::Pca {
            components: vec![5, 10],
        },
        TransformGrid::SelectPercentile {
            percentiles: vec![5.0, 10.0],
        },
    ];
    let estimators = [
        EstimatorGrid::LeastSquares,
        EstimatorGrid::Ridge {
            alphas: vec![0.1, 1.0, 10.0, 100.0],
        },
        EstimatorGrid::BaggedTrees {
            n_trees: 25,
            max_depth: vec![3],
            min_samples_leaf: 2,
        },
    ];
    let mut specs = Vec::new();
    for t in &transforms {
        for e in &estimators {
            let mut spec = PipelineSpec::new(format!("{}+{}", t.label(), e.label()), t.clone(), e.clone());
            spec.seed = seed;
            log::info!("pipeline {} with {} grid points", spec.name, spec.grid().len());
            specs.push(spec);
        }
    }
    specs
}

#[derive(Debug, Clone)]
pub struct FittedPipeline {
    pre: FittedPreprocessing,
    transform: FittedTransform,
    estimator: FittedEstimator,
}

impl FittedPipeline {
    pub fn fit(
        preprocessing: Preprocessing,
        config: Config,
        x: &DMatrix<f64>,
        y: &[f64],
        seed: u64,
        flags: &mut BTreeSet<String>,
    ) -> Result<Self, MlError> {
        let pre = FittedPreprocessing::fit(preprocessing, x)?;
        let xp = pre.apply(x);
        let transform = FittedTransform::fit(config.transform, &xp, y, flags)?;
        let xt = transform.apply(&xp);
        let estimator = FittedEstimator::fit(config.estimator, &xt, y, seed, flags)?;
        Ok(Self {
            pre,
            transform,
            estimator,
        })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.estimator
            .predict(&self.transform.apply(&self.pre.apply(x)))
    }
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |r, c| x[(idx[r], c)])
}

fn is_constant(y: &[f64]) -> bool {
    y.iter().all(|&v| v == y[0])
}

/// Inner leave-one-out mean absolute error of every grid point; failed
/// configurations score infinity. Preprocessing and each distinct transform
/// are fitted once per inner fold and shared across estimator settings.
fn inner_scores(spec: &PipelineSpec, grid: &[Config], x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut totals = vec![0.0; grid.len()];
    let mut transforms: Vec<TransformStep> = Vec::new();
    for c in grid {
        if !transforms.contains(&c.transform) {
            transforms.push(c.transform);
        }
    }
    // one PCA fit with the most components serves every smaller setting
    let widest_pca = transforms
        .iter()
        .filter_map(|t| match t {
            TransformStep::Pca { components } => Some(*components),
            _ => None,
        })
        .max()
        .map(|components| TransformStep::Pca { components });
    for held in 0..n {
        let idx: Vec<usize> = (0..n).filter(|&i| i != held).collect();
        let yt: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        if is_constant(&yt) {
            return vec![f64::INFINITY; grid.len()];
        }
        let Ok(pre) = FittedPreprocessing::fit(spec.preprocessing, &rows(x, &idx)) else {
            return vec![f64::INFINITY; grid.len()];
        };
        let xp = pre.apply(&rows(x, &idx));
        let hp = pre.apply(&rows(x, &[held]));
        let mut scratch = BTreeSet::new();
        let pca = widest_pca.map(|w| FittedTransform::fit(w, &xp, &yt, &mut scratch));
        for t in &transforms {
            let fitted = match (&pca, t) {
                (Some(Ok(wide)), TransformStep::Pca { .. }) => Ok(wide.restrict(*t).expect("pca restricts")),
                _ => FittedTransform::fit(*t, &xp, &yt, &mut scratch),
            };
            let prepared = fitted.map(|f| (f.apply(&xp), f.apply(&hp)));
            for (k, c) in grid.iter().enumerate().filter(|(_, c)| c.transform == *t) {
                let err = prepared.as_ref().ok().and_then(|(xt, ht)| {
                    FittedEstimator::fit(c.estimator, xt, &yt, spec.seed, &mut scratch)
                        .ok()
                        .map(|e| (e.predict(ht)[0] - y[held]).abs())
                });
                totals[k] += err.unwrap_or(f64::INFINITY);
            }
        }
    }
    totals.into_iter().map(|t| t / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub held_out: usize,
    pub prediction: f64,
    pub selected: Config,
    /// Inner mean absolute error per grid point; empty when the grid has a
    /// single point.
    pub inner_mae: Vec<f64>,
    /// Predictions of the fold's final model on its own training subjects.
    pub training_predictions: Vec<f64>,
    pub flags: Vec<String>,
}

/// One outer fold. Only the training rows of `y` are read.
pub fn run_fold(
    spec: &PipelineSpec,
    x: &DMatrix<f64>,
    y: &[f64],
    held_out: usize,
) -> Result<FoldResult, MlError> {
    let n = y.len();
    let train: Vec<usize> = (0..n).filter(|&i| i != held_out).collect();
    let x_train = rows(x, &train);
    let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    if is_constant(&y_train) {
        return Err(MlError::DegenerateFold { held: held_out });
    }
    let grid = spec.grid();
    let (selected, inner_mae) = if grid.len() == 1 {
        (grid[0], Vec::new())
    } else {
        let scores = inner_scores(spec, &grid, &x_train, &y_train);
        let best = scores
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .ok_or(MlError::DegenerateFold { held: held_out })?;
        (grid[best], scores)
    };
    let mut flags = BTreeSet::new();
    let model = FittedPipeline::fit(spec.preprocessing, selected, &x_train, &y_train, spec.seed, &mut flags)?;
    Ok(FoldResult {
        held_out,
        prediction: model.predict(&rows(x, &[held_out]))[0],
        selected,
        inner_mae,
        training_predictions: model.predict(&x_train),
        flags: flags.into_iter().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub pipeline: String,
    pub predictions: Vec<f64>,
    pub truths: Vec<f64>,
    /// Chosen grid point per outer fold.
    pub selections: Vec<Config>,
    pub rho: f64,
    pub variance_explained: f64,
    pub mse: f64,
    pub mae: f64,
    pub flags: Vec<String>,
}

pub fn run_pipeline(spec: &PipelineSpec, x: &DMatrix<f64>, y: &[f64]) -> Result<BenchmarkResult, MlError> {
    spec.validate()?;
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(MlError::Shape(format!("{n} feature rows but {} targets", y.len())));
    }
    if n < 4 {
        return Err(MlError::TooFewSubjects { n, needed: 4 });
    }
    if d == 0 {
        return Err(MlError::NoFeatures);
    }
    let folds: Vec<FoldResult> = (0..n)
        .into_par_iter()
        .map(|i| run_fold(spec, x, y, i))
        .collect::<Result<_, _>>()?;

    let predictions: Vec<f64> = folds.iter().map(|f| f.prediction).collect();
    let mut flags: BTreeSet<String> = folds.iter().flat_map(|f| f.flags.iter().cloned()).collect();
    let rho = match spearman(&predictions, y) {
        Ok(r) => r,
        Err(StatsError::ConstantInput(_)) => {
            flags.insert("constant_predictions".into());
            0.0
        }
        Err(e) => return Err(e.into()),
    };
    let mse = predictions.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n as f64;
    let mae = predictions.iter().zip(y).map(|(p, t)| (p - t).abs()).sum::<f64>() / n as f64;
    Ok(BenchmarkResult {
        pipeline: spec.name.clone(),
        predictions,
        truths: y.to_vec(),
        selections: folds.iter().map(|f| f.selected).collect(),
        rho,
        variance_explained: signed_r2_percent(rho),
        mse,
        mae,
        flags: flags.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::loocv_linear;
    use approx::assert_abs_diff_eq;

    fn identity_ls() -> PipelineSpec {
        PipelineSpec {
            preprocessing: Preprocessing::identity(),
            ..PipelineSpec::new("id", TransformGrid::Identity, EstimatorGrid::LeastSquares)
        }
    }

    #[test]
    fn single_feature_matches_stats_loocv_bitwise() {
        let x: Vec<f64> = (0..15).map(|i| ((i * 7) % 13) as f64 * 0.37).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| 2.0 * v + ((i * 5) % 3) as f64).collect();
        let m = DMatrix::from_column_slice(15, 1, &x);
        let a = run_pipeline(&identity_ls(), &m, &y).unwrap();
        let b = loocv_linear(&x, &y).unwrap();
        assert_eq!(a.predictions, b.predictions);
        assert_eq!(a.variance_explained, b.variance_explained);
    }

    #[test]
    fn linear_target_is_recovered() {
        let m = DMatrix::from_fn(12, 3, |i, j| if j == 0 { i as f64 } else { ((i * i + 3 * j) as f64).sin() });
        let y: Vec<f64> = (0..12).map(|i| 3.0 * m[(i, 0)] - 1.0).collect();
        let r = run_pipeline(&PipelineSpec::new("ls", TransformGrid::Identity, EstimatorGrid::LeastSquares), &m, &y)
            .unwrap();
        assert_abs_diff_eq!(r.variance_explained, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn grid_is_product_and_validated() {
        let spec = PipelineSpec::new(
            "p",
            TransformGrid::Pca { components: vec![2, 3] },
            EstimatorGrid::Ridge { alphas: vec![1.0, 2.0, 3.0] },
        );
        assert_eq!(spec.grid().len(), 6);
        let bad = PipelineSpec::new("b", TransformGrid::Identity, EstimatorGrid::Ridge { alphas: vec![] });
        assert!(matches!(bad.validate(), Err(MlError::InvalidSpec { .. })));
        assert_eq!(default_space(0).len(), 9);
    }

    #[test]
    fn degenerate_inputs() {
        let m = DMatrix::from_fn(5, 2, |i, j| (i + j) as f64);
        assert!(matches!(
            run_pipeline(&identity_ls(), &m, &[1.0; 5]),
            Err(MlError::DegenerateFold { .. })
        ));
        assert!(matches!(
            run_pipeline(&identity_ls(), &DMatrix::zeros(3, 1), &[1.0, 2.0, 3.0]),
            Err(MlError::TooFewSubjects { .. })
        ));
    }
}
