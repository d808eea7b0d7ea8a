use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::tree::{BaggedTrees, TreeParams};
use super::MlError;
use crate::stats::{design_matrix, ols_fit, StatsError};

const PINV_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorGrid {
    LeastSquares,
    Ridge {
        alphas: Vec<f64>,
    },
    BaggedTrees {
        n_trees: usize,
        max_depth: Vec<usize>,
        min_samples_leaf: usize,
    },
}

impl EstimatorGrid {
    pub fn steps(&self) -> Vec<EstimatorStep> {
        match self {
            EstimatorGrid::LeastSquares => vec![EstimatorStep::LeastSquares],
            EstimatorGrid::Ridge { alphas } => alphas
                .iter()
                .map(|&alpha| EstimatorStep::Ridge { alpha })
                .collect(),
            EstimatorGrid::BaggedTrees {
                n_trees,
                max_depth,
                min_samples_leaf,
            } => max_depth
                .iter()
                .map(|&max_depth| EstimatorStep::BaggedTrees {
                    n_trees: *n_trees,
                    max_depth,
                    min_samples_leaf: *min_samples_leaf,
                })
                .collect(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EstimatorGrid::LeastSquares => "least_squares",
            EstimatorGrid::Ridge { .. } => "ridge",
            EstimatorGrid::BaggedTrees { .. } => "bagged_trees",
        }
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        match self {
            EstimatorGrid::LeastSquares => Ok(()),
            EstimatorGrid::Ridge { alphas } => {
                if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                    Err("ridge needs a nonempty list of positive penalties".into())
                } else {
                    Ok(())
                }
            }
            EstimatorGrid::BaggedTrees {
                n_trees,
                max_depth,
                min_samples_leaf,
            } => {
                if *n_trees == 0 || max_depth.is_empty() || *min_samples_leaf == 0 {
                    Err("bagged trees need n_trees, max_depth and min_samples_leaf > 0".into())
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorStep {
    LeastSquares,
    Ridge {
        alpha: f64,
    },
    BaggedTrees {
        n_trees: usize,
        max_depth: usize,
        min_samples_leaf: usize,
    },
}

#[derive(Debug, Clone)]
pub(crate) enum FittedEstimator {
    /// `coef[0]` is the intercept.
    Linear { coef: Vec<f64> },
    Trees(BaggedTrees),
}

fn column_means(x: &DMatrix<f64>) -> Vec<f64> {
    (0..x.ncols()).map(|j| x.column(j).sum() / x.nrows() as f64).collect()
}

fn centered(x: &DMatrix<f64>, means: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - means[j])
}

fn with_intercept(beta: &DVector<f64>, x_mean: &[f64], y_mean: f64) -> Vec<f64> {
    let shift: f64 = beta.iter().zip(x_mean).map(|(b, m)| b * m).sum();
    std::iter::once(y_mean - shift).chain(beta.iter().copied()).collect()
}

/// Minimum-norm least squares on centered data.
fn min_norm(x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>, MlError> {
    let xm = column_means(x);
    let ym = y.iter().sum::<f64>() / y.len() as f64;
    let xc = centered(x, &xm);
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - ym));
    let svd = xc.svd(true, true);
    let smax = svd.singular_values.max();
    let beta = svd
        .solve(&yc, PINV_TOL * smax.max(f64::MIN_POSITIVE))
        .map_err(|e| MlError::Numerical(e.to_string()))?;
    Ok(with_intercept(&beta, &xm, ym))
}

fn ridge(x: &DMatrix<f64>, y: &[f64], alpha: f64) -> Result<Vec<f64>, MlError> {
    let (n, d) = x.shape();
    let xm = column_means(x);
    let ym = y.iter().sum::<f64>() / n as f64;
    let xc = centered(x, &xm);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ym));
    let beta = if d <= n {
        let gram = xc.transpose() * &xc + DMatrix::identity(d, d) * alpha;
        gram.cholesky()
            .ok_or_else(|| MlError::Numerical("ridge normal equations not positive definite".into()))?
            .solve(&(xc.transpose() * &yc))
    } else {
        let kernel = &xc * xc.transpose() + DMatrix::identity(n, n) * alpha;
        let w = kernel
            .cholesky()
            .ok_or_else(|| MlError::Numerical("ridge kernel not positive definite".into()))?
            .solve(&yc);
        xc.transpose() * w
    };
    Ok(with_intercept(&beta, &xm, ym))
}

impl FittedEstimator {
    pub fn fit(
        step: EstimatorStep,
        x: &DMatrix<f64>,
        y: &[f64],
        seed: u64,
        flags: &mut BTreeSet<String>,
    ) -> Result<Self, MlError> {
        match step {
            EstimatorStep::LeastSquares => {
                let cols: Vec<Vec<f64>> =
                    (0..x.ncols()).map(|j| x.column(j).iter().copied().collect()).collect();
                let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
                match ols_fit(&design_matrix(y.len(), &refs), &DVector::from_column_slice(y)) {
                    Ok(fit) => Ok(FittedEstimator::Linear {
                        coef: fit.coefficients.iter().copied().collect(),
                    }),
                    Err(StatsError::RankDeficient { .. } | StatsError::TooFewObservations { .. }) => {
                        flags.insert("least_squares_min_norm".into());
                        Ok(FittedEstimator::Linear { coef: min_norm(x, y)? })
                    }
                    Err(e) => Err(e.into()),
                }
            }
            EstimatorStep::Ridge { alpha } => Ok(FittedEstimator::Linear {
                coef: ridge(x, y, alpha)?,
            }),
            EstimatorStep::BaggedTrees {
                n_trees,
                max_depth,
                min_samples_leaf,
            } => Ok(FittedEstimator::Trees(BaggedTrees::fit(
                x,
                y,
                n_trees,
                TreeParams {
                    max_depth,
                    min_samples_leaf,
                },
                seed,
            ))),
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                match self {
                    FittedEstimator::Linear { coef } => {
                        let mut p = coef[0];
                        for (c, v) in coef[1..].iter().zip(&row) {
                            p += c * v;
                        }
                        p
                    }
                    FittedEstimator::Trees(t) => t.predict_row(&row),
                }
            })
            .collect()
    }
}
