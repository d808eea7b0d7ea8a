use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::MlError;
use crate::linalg::quantile_sorted;

pub const VARIANCE_THRESHOLD: f64 = 1e-12;
pub const IQR_FLOOR: f64 = 1e-12;
/// Singular values below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-10;

/// Which of the fixed preprocessing stages run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub variance_threshold: bool,
    pub mean_impute: bool,
    pub robust_scale: bool,
}

impl Default for Preprocessing {
    fn default() -> Self {
        Self {
            variance_threshold: true,
            mean_impute: true,
            robust_scale: true,
        }
    }
}

impl Preprocessing {
    pub fn identity() -> Self {
        Self {
            variance_threshold: false,
            mean_impute: false,
            robust_scale: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformGrid {
    Identity,
    Pca { components: Vec<usize> },
    SelectPercentile { percentiles: Vec<f64> },
}

impl TransformGrid {
    pub fn steps(&self) -> Vec<TransformStep> {
        match self {
            TransformGrid::Identity => vec![TransformStep::Identity],
            TransformGrid::Pca { components } => components
                .iter()
                .map(|&components| TransformStep::Pca { components })
                .collect(),
            TransformGrid::SelectPercentile { percentiles } => percentiles
                .iter()
                .map(|&percentile| TransformStep::SelectPercentile { percentile })
                .collect(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TransformGrid::Identity => "identity",
            TransformGrid::Pca { .. } => "pca",
            TransformGrid::SelectPercentile { .. } => "select_percentile",
        }
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        match self {
            TransformGrid::Identity => Ok(()),
            TransformGrid::Pca { components } => {
                if components.is_empty() || components.contains(&0) {
                    Err("pca needs a nonempty list of positive component counts".into())
                } else {
                    Ok(())
                }
            }
            TransformGrid::SelectPercentile { percentiles } => {
                if percentiles.is_empty() || percentiles.iter().any(|p| !(*p > 0.0 && *p <= 100.0)) {
                    Err("percentiles must be a nonempty list in (0, 100]".into())
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformStep {
    Identity,
    Pca { components: usize },
    SelectPercentile { percentile: f64 },
}

/// Threshold, impute and scale parameters learned on a training set.
#[derive(Debug, Clone)]
pub(crate) struct FittedPreprocessing {
    keep: Vec<usize>,
    fill: Vec<f64>,
    center: Vec<f64>,
    scale: Vec<f64>,
}

fn present(x: &DMatrix<f64>, j: usize) -> Vec<f64> {
    x.column(j).iter().copied().filter(|v| !v.is_nan()).collect()
}

impl FittedPreprocessing {
    pub fn fit(cfg: Preprocessing, x: &DMatrix<f64>) -> Result<Self, MlError> {
        let d = x.ncols();
        let has_nan = x.iter().any(|v| v.is_nan());
        if has_nan && !cfg.mean_impute {
            return Err(MlError::MissingValues);
        }
        let keep: Vec<usize> = if cfg.variance_threshold {
            (0..d)
                .filter(|&j| {
                    let v = present(x, j);
                    if v.is_empty() {
                        return false;
                    }
                    let m = v.iter().sum::<f64>() / v.len() as f64;
                    let var = v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64;
                    var >= VARIANCE_THRESHOLD
                })
                .collect()
        } else {
            (0..d).collect()
        };
        if keep.is_empty() {
            return Err(MlError::NoFeatures);
        }
        let fill: Vec<f64> = if cfg.mean_impute {
            keep.iter()
                .map(|&j| {
                    let v = present(x, j);
                    if v.is_empty() {
                        Err(MlError::MissingValues)
                    } else {
                        Ok(v.iter().sum::<f64>() / v.len() as f64)
                    }
                })
                .collect::<Result<_, _>>()?
        } else {
            vec![0.0; keep.len()]
        };
        let (center, scale) = if cfg.robust_scale {
            keep.iter()
                .zip(&fill)
                .map(|(&j, &f)| {
                    let mut v: Vec<f64> =
                        x.column(j).iter().map(|&a| if a.is_nan() { f } else { a }).collect();
                    v.sort_by(f64::total_cmp);
                    let med = quantile_sorted(&v, 0.5);
                    let iqr = quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25);
                    (med, iqr.max(IQR_FLOOR))
                })
                .unzip()
        } else {
            (vec![0.0; keep.len()], vec![1.0; keep.len()])
        };
        Ok(Self {
            keep,
            fill,
            center,
            scale,
        })
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), self.keep.len(), |i, k| {
            let mut v = x[(i, self.keep[k])];
            if v.is_nan() {
                v = self.fill[k];
            }
            (v - self.center[k]) / self.scale[k]
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) enum FittedTransform {
    Identity,
    Pca { mean: Vec<f64>, basis: DMatrix<f64> },
    Select { columns: Vec<usize> },
}

/// Univariate regression F statistic of each column against `y`:
/// `r² / (1 - r²) · (n - 2)`. Constant columns score 0.
pub fn f_scores(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    (0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let mx = col.sum() / n;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (a, b) in col.iter().zip(y) {
                sxy += (a - mx) * (b - my);
                sxx += (a - mx).powi(2);
            }
            if sxx == 0.0 || syy == 0.0 {
                return 0.0;
            }
            let r2 = (sxy * sxy / (sxx * syy)).min(1.0);
            if r2 >= 1.0 {
                f64::INFINITY
            } else {
                r2 / (1.0 - r2) * (n - 2.0)
            }
        })
        .collect()
}

impl FittedTransform {
    pub fn fit(
        step: TransformStep,
        x: &DMatrix<f64>,
        y: &[f64],
        flags: &mut BTreeSet<String>,
    ) -> Result<Self, MlError> {
        match step {
            TransformStep::Identity => Ok(FittedTransform::Identity),
            TransformStep::Pca { components } => {
                let (n, d) = x.shape();
                let mean: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
                let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
                let svd = centered.svd(false, true);
                let v_t = svd
                    .v_t
                    .ok_or_else(|| MlError::Numerical("svd did not return v_t".into()))?;
                let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
                order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
                let smax = order.first().map_or(0.0, |&k| svd.singular_values[k]);
                let rank = order
                    .iter()
                    .filter(|&&k| svd.singular_values[k] > RANK_TOL * smax)
                    .count();
                if rank == 0 {
                    return Err(MlError::NoFeatures);
                }
                let k = if components > rank {
                    flags.insert(format!("pca_components_clipped:{components}->{rank}"));
                    rank
                } else {
                    components
                };
                let basis = DMatrix::from_fn(d, k, |j, c| v_t[(order[c], j)]);
                Ok(FittedTransform::Pca { mean, basis })
            }
            TransformStep::SelectPercentile { percentile } => {
                let d = x.ncols();
                let k = ((d as f64 * percentile / 100.0).ceil() as usize).clamp(1, d);
                let scores = f_scores(x, y);
                let mut order: Vec<usize> = (0..d).collect();
                order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
                let mut columns = order[..k].to_vec();
                columns.sort_unstable();
                Ok(FittedTransform::Select { columns })
            }
        }
    }

    /// The fit `step` would produce, derived from this one when that is
    /// possible without refitting: a PCA fit restricted to fewer components.
    pub fn restrict(&self, step: TransformStep) -> Option<Self> {
        match (self, step) {
            (FittedTransform::Pca { mean, basis }, TransformStep::Pca { components }) => {
                let k = components.min(basis.ncols());
                Some(FittedTransform::Pca {
                    mean: mean.clone(),
                    basis: basis.columns(0, k).into_owned(),
                })
            }
            _ => None,
        }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            FittedTransform::Identity => x.clone(),
            FittedTransform::Pca { mean, basis } => {
                let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - mean[j]);
                centered * basis
            }
            FittedTransform::Select { columns } => {
                DMatrix::from_fn(x.nrows(), columns.len(), |i, k| x[(i, columns[k])])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn threshold_drops_constant_and_scaling_uses_iqr() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 4.0, 5.0]);
        let p = FittedPreprocessing::fit(Preprocessing::default(), &x).unwrap();
        let out = p.apply(&x);
        assert_eq!(out.ncols(), 1);
        // median 2.5, IQR 3.25 - 1.75 = 1.5
        assert_abs_diff_eq!(out[(0, 0)], (1.0 - 2.5) / 1.5, epsilon = 1e-15);
    }

    #[test]
    fn imputation_uses_training_mean() {
        let x = DMatrix::from_row_slice(3, 1, &[1.0, f64::NAN, 3.0]);
        let cfg = Preprocessing {
            robust_scale: false,
            ..Preprocessing::default()
        };
        let p = FittedPreprocessing::fit(cfg, &x).unwrap();
        assert_eq!(p.apply(&x)[(1, 0)], 2.0);
        assert!(matches!(
            FittedPreprocessing::fit(Preprocessing::identity(), &x),
            Err(MlError::MissingValues)
        ));
    }

    #[test]
    fn pca_clips_to_rank() {
        // rank-1 data
        let x = DMatrix::from_fn(5, 3, |i, j| (i as f64) * (j as f64 + 1.0));
        let mut flags = BTreeSet::new();
        let t = FittedTransform::fit(TransformStep::Pca { components: 3 }, &x, &[0.0; 5], &mut flags)
            .unwrap();
        assert_eq!(t.apply(&x).ncols(), 1);
        assert_eq!(flags.len(), 1);
    }

    #[test]
    fn select_percentile_keeps_informative_column() {
        let y: Vec<f64> = (0..10).map(f64::from).collect();
        let x = DMatrix::from_fn(10, 20, |i, j| {
            if j == 7 {
                y[i] * 2.0
            } else {
                ((i * 31 + j * 17) % 11) as f64
            }
        });
        let mut flags = BTreeSet::new();
        let t = FittedTransform::fit(
            TransformStep::SelectPercentile { percentile: 5.0 },
            &x,
            &y,
            &mut flags,
        )
        .unwrap();
        match t {
            FittedTransform::Select { columns } => assert_eq!(columns, vec![7]),
            _ => unreachable!(),
        }
    }
}
