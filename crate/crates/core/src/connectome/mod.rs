//! Structural connectome ingestion: streamline-count matrices, edge
//! thresholding, binarisation, spectral stabilisation and cohort QC.

mod io;
mod qc;

pub use io::{load_edge_values, load_raw, parse_matrix_csv, save_matrix_csv, save_raw};
pub use qc::{qc_outliers, MetricFence, QcConfig, QcMetric, QcReport, SubjectQc};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{self, LinalgError};

/// Default minimum streamline count for an edge to be kept.
pub const DEFAULT_MIN_STREAMLINES: u32 = 3;

#[derive(Debug, Error)]
pub enum ConnectomeError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("could not parse {value:?} at row {row}, column {col}")]
    Parse { row: usize, col: usize, value: String },
    #[error("matrix file is empty")]
    Empty,
    #[error("matrix is not square: {rows} rows, row {row} has {cols} columns")]
    NotSquare { rows: usize, row: usize, cols: usize },
    #[error("negative entry {value} at ({row},{col})")]
    Negative { row: usize, col: usize, value: f64 },
    #[error("NaN entry at ({row},{col})")]
    NaN { row: usize, col: usize },
    #[error("asymmetric entries at ({i},{j}) differ by {gap:e}, tolerance {tol:e}")]
    Asymmetric { i: usize, j: usize, gap: f64, tol: f64 },
    #[error("edge-value matrix has {got} nodes, streamline matrix has {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("minimum streamline count must be at least 1, got {0}")]
    InvalidThreshold(u32),
    #[error("QC needs at least 4 subjects to define quartiles, got {0}")]
    CohortTooSmall(usize),
    #[error("subject {subject} has no FA values but the FA metric was requested")]
    MissingFa { subject: usize },
    #[error("QC needs at least one metric")]
    NoMetrics,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Streamline counts between brain regions for one subject, optionally with
/// per-edge fractional anisotropy (FA) and mean diffusivity (MD).
#[derive(Debug, Clone, PartialEq)]
pub struct RawConnectome {
    weights: DMatrix<f64>,
    fa: Option<DMatrix<f64>>,
    md: Option<DMatrix<f64>>,
}

impl RawConnectome {
    /// Validates and symmetrises a streamline-count matrix.
    ///
    /// Entries must be finite and nonnegative and the matrix symmetric
    /// within [`linalg::SYMMETRY_TOL`]; the two triangles are then averaged
    /// so the stored matrix is exactly symmetric. A nonzero diagonal is
    /// zeroed with a warning.
    pub fn from_matrix(weights: DMatrix<f64>) -> Result<Self, ConnectomeError> {
        let weights = sanitize(weights, "streamline")?;
        Ok(Self {
            weights,
            fa: None,
            md: None,
        })
    }

    pub fn with_fa(mut self, fa: DMatrix<f64>) -> Result<Self, ConnectomeError> {
        self.check_shape(&fa)?;
        self.fa = Some(sanitize(fa, "FA")?);
        Ok(self)
    }

    pub fn with_md(mut self, md: DMatrix<f64>) -> Result<Self, ConnectomeError> {
        self.check_shape(&md)?;
        self.md = Some(sanitize(md, "MD")?);
        Ok(self)
    }

    fn check_shape(&self, m: &DMatrix<f64>) -> Result<(), ConnectomeError> {
        if m.nrows() != self.n() || m.ncols() != self.n() {
            return Err(ConnectomeError::ShapeMismatch {
                expected: self.n(),
                got: m.nrows().max(m.ncols()),
            });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn fa(&self) -> Option<&DMatrix<f64>> {
        self.fa.as_ref()
    }

    pub fn md(&self) -> Option<&DMatrix<f64>> {
        self.md.as_ref()
    }
}

fn sanitize(mut m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>, ConnectomeError> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(ConnectomeError::NotSquare {
            rows: n,
            row: 0,
            cols: m.ncols(),
        });
    }
    for row in 0..n {
        for col in 0..n {
            let v = m[(row, col)];
            if v.is_nan() {
                return Err(ConnectomeError::NaN { row, col });
            }
            if v < 0.0 || v.is_infinite() {
                return Err(ConnectomeError::Negative { row, col, value: v });
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (m[(i, j)] - m[(j, i)]).abs();
            if gap > linalg::SYMMETRY_TOL {
                return Err(ConnectomeError::Asymmetric {
                    i,
                    j,
                    gap,
                    tol: linalg::SYMMETRY_TOL,
                });
            }
            if gap > 0.0 {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
    }
    let mut zeroed = 0;
    for i in 0..n {
        if m[(i, i)] != 0.0 {
            m[(i, i)] = 0.0;
            zeroed += 1;
        }
    }
    if zeroed > 0 {
        log::warn!("{what} matrix had {zeroed} nonzero diagonal entries; set to zero");
    }
    Ok(m)
}

/// Symmetric, zero-diagonal adjacency matrix used as the state-transition
/// matrix of the network model.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectomeMatrix {
    adjacency: DMatrix<f64>,
    binary: bool,
    spectral_radius: f64,
    edge_count: usize,
}

impl ConnectomeMatrix {
    /// Wraps a symmetric matrix, computing its spectral radius and edge count.
    ///
    /// The diagonal is not required to be zero here so scaled families such
    /// as `c * I` can be analysed directly.
    pub fn from_adjacency(adjacency: DMatrix<f64>) -> Result<Self, ConnectomeError> {
        linalg::check_symmetric(&adjacency, linalg::SYMMETRY_TOL)?;
        let adjacency = DMatrix::from_fn(adjacency.nrows(), adjacency.ncols(), |i, j| {
            0.5 * (adjacency[(i, j)] + adjacency[(j, i)])
        });
        let spectral_radius = linalg::spectral_radius(&adjacency)?;
        let edge_count = count_edges(&adjacency);
        Ok(Self {
            adjacency,
            binary: false,
            spectral_radius,
            edge_count,
        })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            adjacency: DMatrix::zeros(n, n),
            binary: true,
            spectral_radius: 0.0,
            edge_count: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// True when the discrete system `x(k+1) = A x(k)` is asymptotically
    /// stable. A radius within 1e-12 of one counts as unstable, since the
    /// eigensolver cannot resolve it from the unit circle.
    pub fn is_stable(&self) -> bool {
        self.spectral_radius < 1.0 - 1e-12
    }

    /// Returns `c * A`. Eigenvectors are unchanged and the spectral radius
    /// scales by `|c|`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            adjacency: &self.adjacency * c,
            binary: self.binary && c == 1.0,
            spectral_radius: self.spectral_radius * c.abs(),
            edge_count: if c == 0.0 { 0 } else { self.edge_count },
        }
    }
}

/// Keeps an edge iff its streamline count is at least `min_streamlines`,
/// discarding the weight.
pub fn threshold_binarize(
    raw: &RawConnectome,
    min_streamlines: u32,
) -> Result<ConnectomeMatrix, ConnectomeError> {
    if min_streamlines < 1 {
        return Err(ConnectomeError::InvalidThreshold(min_streamlines));
    }
    let min = f64::from(min_streamlines);
    let w = raw.weights();
    let n = raw.n();
    let adjacency = DMatrix::from_fn(n, n, |i, j| {
        if i != j && w[(i, j)] >= min {
            1.0
        } else {
            0.0
        }
    });
    let spectral_radius = linalg::spectral_radius(&adjacency)?;
    let edge_count = count_edges(&adjacency);
    Ok(ConnectomeMatrix {
        adjacency,
        binary: true,
        spectral_radius,
        edge_count,
    })
}

/// Divides the adjacency by `1 + λ_max`, where `λ_max` is the largest
/// eigenvalue magnitude, so the resulting spectral radius is
/// `λ_max / (1 + λ_max) < 1`.
pub fn stabilize(m: &ConnectomeMatrix) -> ConnectomeMatrix {
    let lambda_max = m.spectral_radius;
    let scale = 1.0 + lambda_max;
    ConnectomeMatrix {
        adjacency: &m.adjacency / scale,
        binary: false,
        spectral_radius: lambda_max / scale,
        edge_count: m.edge_count,
    }
}

/// Number of undirected edges: strictly positive upper-triangle entries.
pub fn edge_count(m: &ConnectomeMatrix) -> usize {
    m.edge_count
}

fn count_edges(a: &DMatrix<f64>) -> usize {
    let n = a.nrows();
    (0..n)
        .map(|i| ((i + 1)..n).filter(|&j| a[(i, j)] > 0.0).count())
        .sum()
}

/// Threshold, binarise and stabilise in one step.
pub fn prepare(raw: &RawConnectome, min_streamlines: u32) -> Result<ConnectomeMatrix, ConnectomeError> {
    Ok(stabilize(&threshold_binarize(raw, min_streamlines)?))
}
