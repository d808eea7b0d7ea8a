use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::StatsError;

/// A column whose component orthogonal to the preceding columns is smaller
/// than this fraction of its norm counts as linearly dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub std_errors: DVector<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
    pub df_resid: usize,
}

impl OlsFit {
    /// Two-sided t-test p-value for coefficient `k` being zero.
    pub fn p_value(&self, k: usize) -> f64 {
        let se = self.std_errors[k];
        if se == 0.0 {
            return if self.coefficients[k] == 0.0 { 1.0 } else { 0.0 };
        }
        let t = self.coefficients[k] / se;
        let dist = StudentsT::new(0.0, 1.0, self.df_resid as f64).expect("df_resid >= 1");
        2.0 * dist.sf(t.abs())
    }
}

/// Builds the `n`-row design `[1, c_1, c_2, ...]` from column vectors.
pub fn design_matrix(n: usize, columns: &[&[f64]]) -> DMatrix<f64> {
    DMatrix::from_fn(n, columns.len() + 1, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] })
}

/// Least squares via Householder QR.
///
/// Fails when `n <= p` or when a column is (numerically) a linear
/// combination of the columns before it.
pub fn ols_fit(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit, StatsError> {
    let (n, p) = design.shape();
    if y.len() != n {
        return Err(StatsError::LengthMismatch(n, y.len()));
    }
    if n <= p {
        return Err(StatsError::TooFewObservations { n, needed: p + 1 });
    }
    let qr = design.clone().qr();
    let r = qr.r();
    for k in 0..p {
        let col_norm = design.column(k).norm();
        if col_norm == 0.0 || r[(k, k)].abs() <= RANK_TOL * col_norm {
            return Err(StatsError::RankDeficient { column: k });
        }
    }
    let qty = qr.q().transpose() * y;
    let coefficients = r
        .solve_upper_triangular(&qty)
        .ok_or(StatsError::RankDeficient { column: p - 1 })?;
    let residuals = y - design * &coefficients;
    let rss = residuals.norm_squared();
    let df_resid = n - p;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(StatsError::RankDeficient { column: p - 1 })?;
    let sigma2 = rss / df_resid as f64;
    let std_errors = DVector::from_fn(p, |k, _| (sigma2 * r_inv.row(k).norm_squared()).sqrt());

    Ok(OlsFit {
        coefficients,
        std_errors,
        residuals,
        rss,
        df_resid,
    })
}
