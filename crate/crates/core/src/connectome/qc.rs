//! Cohort-level outlier screening with Tukey fences.
//!
//! All four metrics are computed on the binarised graphs (edges with at least
//! `min_streamlines` streamlines). Connection prevalence of an edge is the
//! fraction of subjects in the cohort that have it.

use serde::{Deserialize, Serialize};

use super::{ConnectomeError, RawConnectome, DEFAULT_MIN_STREAMLINES};
use crate::linalg::quantile_sorted;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QcMetric {
    /// Mean streamline count over the subject's present edges.
    MeanStreamlines,
    /// Mean FA over the subject's present edges.
    MeanFa,
    /// Mean cohort prevalence of the subject's present edges. Low when the
    /// subject has unusual connections.
    ConnectionPrevalence,
    /// Mean cohort prevalence of the region pairs the subject is missing.
    /// High when the subject lacks commonly found connections.
    RegionPrevalence,
}

impl QcMetric {
    pub const ALL: [QcMetric; 4] = [
        QcMetric::MeanStreamlines,
        QcMetric::MeanFa,
        QcMetric::ConnectionPrevalence,
        QcMetric::RegionPrevalence,
    ];
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QcConfig {
    pub min_streamlines: u32,
    pub metrics: Vec<QcMetric>,
    pub fence_multiplier: f64,
}

impl Default for QcConfig {
    fn default() -> Self {
        Self {
            min_streamlines: DEFAULT_MIN_STREAMLINES,
            metrics: QcMetric::ALL.to_vec(),
            fence_multiplier: 1.5,
        }
    }
}

impl QcConfig {
    /// All metrics except mean FA.
    pub fn without_fa() -> Self {
        Self {
            metrics: QcMetric::ALL
                .into_iter()
                .filter(|m| *m != QcMetric::MeanFa)
                .collect(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFence {
    pub metric: QcMetric,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower: f64,
    pub upper: f64,
}

impl MetricFence {
    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower && value <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectQc {
    pub index: usize,
    /// Metric values in the order of [`QcReport::fences`].
    pub values: Vec<f64>,
    pub outside: Vec<QcMetric>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcReport {
    pub fences: Vec<MetricFence>,
    pub subjects: Vec<SubjectQc>,
}

impl QcReport {
    pub fn flagged_indices(&self) -> Vec<usize> {
        self.subjects
            .iter()
            .filter(|s| s.flagged)
            .map(|s| s.index)
            .collect()
    }
}

/// Computes the per-subject QC metrics and flags every subject that falls
/// outside `[Q1 - k·IQR, Q3 + k·IQR]` on any metric.
pub fn qc_outliers(cohort: &[RawConnectome], cfg: &QcConfig) -> Result<QcReport, ConnectomeError> {
    if cohort.len() < 4 {
        return Err(ConnectomeError::CohortTooSmall(cohort.len()));
    }
    if cfg.metrics.is_empty() {
        return Err(ConnectomeError::NoMetrics);
    }
    if cfg.min_streamlines < 1 {
        return Err(ConnectomeError::InvalidThreshold(cfg.min_streamlines));
    }
    let n = cohort[0].n();
    for s in cohort {
        if s.n() != n {
            return Err(ConnectomeError::ShapeMismatch {
                expected: n,
                got: s.n(),
            });
        }
    }
    if cfg.metrics.contains(&QcMetric::MeanFa) {
        if let Some(subject) = cohort.iter().position(|s| s.fa().is_none()) {
            return Err(ConnectomeError::MissingFa { subject });
        }
    }

    let min = f64::from(cfg.min_streamlines);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let present: Vec<Vec<bool>> = cohort
        .iter()
        .map(|s| pairs.iter().map(|&(i, j)| s.weights()[(i, j)] >= min).collect())
        .collect();
    let prevalence: Vec<f64> = (0..pairs.len())
        .map(|e| present.iter().filter(|p| p[e]).count() as f64 / cohort.len() as f64)
        .collect();

    let metric_values = |s: usize, metric: QcMetric| -> f64 {
        let subject = &cohort[s];
        let edges = &present[s];
        let mean_over = |keep: bool, value: &dyn Fn(usize) -> f64| -> f64 {
            let (sum, count) = edges
                .iter()
                .enumerate()
                .filter(|(_, &p)| p == keep)
                .fold((0.0, 0usize), |(acc, c), (e, _)| (acc + value(e), c + 1));
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        };
        match metric {
            QcMetric::MeanStreamlines => mean_over(true, &|e| {
                let (i, j) = pairs[e];
                subject.weights()[(i, j)]
            }),
            QcMetric::MeanFa => {
                let fa = subject.fa().expect("checked above");
                mean_over(true, &|e| {
                    let (i, j) = pairs[e];
                    fa[(i, j)]
                })
            }
            QcMetric::ConnectionPrevalence => mean_over(true, &|e| prevalence[e]),
            QcMetric::RegionPrevalence => mean_over(false, &|e| prevalence[e]),
        }
    };

    let values: Vec<Vec<f64>> = (0..cohort.len())
        .map(|s| cfg.metrics.iter().map(|&m| metric_values(s, m)).collect())
        .collect();

    let fences: Vec<MetricFence> = cfg
        .metrics
        .iter()
        .enumerate()
        .map(|(k, &metric)| {
            let mut col: Vec<f64> = values.iter().map(|v| v[k]).collect();
            col.sort_by(f64::total_cmp);
            let q1 = quantile_sorted(&col, 0.25);
            let q2 = quantile_sorted(&col, 0.5);
            let q3 = quantile_sorted(&col, 0.75);
            let iqr = q3 - q1;
            MetricFence {
                metric,
                q1,
                q2,
                q3,
                iqr,
                lower: q1 - cfg.fence_multiplier * iqr,
                upper: q3 + cfg.fence_multiplier * iqr,
            }
        })
        .collect();

    let subjects = values
        .into_iter()
        .enumerate()
        .map(|(index, values)| {
            let outside: Vec<QcMetric> = fences
                .iter()
                .zip(&values)
                .filter(|(f, &v)| !f.contains(v))
                .map(|(f, _)| f.metric)
                .collect();
            SubjectQc {
                index,
                flagged: !outside.is_empty(),
                values,
                outside,
            }
        })
        .collect();

    Ok(QcReport { fences, subjects })
}
