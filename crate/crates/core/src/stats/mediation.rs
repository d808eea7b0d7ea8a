//! Single-mediator analysis `x → m → y` with covariates.
//!
//! Paths come from three regressions that all include an intercept and the
//! covariates:
//!
//! * `m ~ x`      gives `a`
//! * `y ~ x + m`  gives `c'` (x) and `b` (m)
//! * `y ~ x`      gives the total effect `c`
//!
//! The indirect effect is `ab = a·b`. Its confidence interval is the
//! bias-corrected (not accelerated) percentile bootstrap over resampled rows.
//! Its p-value comes from a permutation test: the mediator's residuals after
//! covariate adjustment are shuffled against `x` and `y`, breaking both
//! paths, and `|a*b*|` is compared with the observed `|ab|`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::ols::{design_matrix, ols_fit, OlsFit};
use super::{CohortTable, Column, StatsError};
use crate::linalg::quantile_sorted;
use crate::rng::{stream_rng, DOMAIN_BOOTSTRAP, DOMAIN_PERMUTATION};

/// Redraws allowed for one resampling iteration before giving up.
const MAX_REDRAWS_PER_ITERATION: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediationConfig {
    pub n_boot: usize,
    pub n_perm: usize,
    pub seed: u64,
    /// Two-sided level of the bootstrap interval.
    pub alpha: f64,
}

impl Default for MediationConfig {
    fn default() -> Self {
        Self {
            n_boot: 10_000,
            n_perm: 10_000,
            seed: 0,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathEstimate {
    pub coef: f64,
    pub se: f64,
    /// Two-sided t-test p-value.
    pub p: f64,
}

impl PathEstimate {
    fn from_fit(fit: &OlsFit, k: usize) -> Self {
        Self {
            coef: fit.coefficients[k],
            se: fit.std_errors[k],
            p: fit.p_value(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediationResult {
    pub a: f64,
    pub b: f64,
    pub c_total: f64,
    pub c_prime: f64,
    pub ab: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_perm: f64,
    pub n_boot: usize,
    pub n_perm: usize,
    pub seed: u64,
    pub n_used: usize,
    /// Bootstrap or permutation draws that were rank deficient and redrawn.
    pub redraws: usize,
    /// Set when the point estimate falls outside its own bootstrap interval.
    pub ab_outside_ci: bool,
    pub path_a: PathEstimate,
    pub path_b: PathEstimate,
    pub path_c: PathEstimate,
    pub path_c_prime: PathEstimate,
}

pub fn mediate(
    cohort: &CohortTable,
    x: Column,
    m: Column,
    y: Column,
    covariates: &[Column],
    cfg: &MediationConfig,
) -> Result<MediationResult, StatsError> {
    let mut cols = vec![x, m, y];
    cols.extend_from_slice(covariates);
    let data = cohort.complete_cases(&cols)?;
    mediate_arrays(&data[0], &data[1], &data[2], &data[3..], cfg)
}

struct Rows<'a> {
    x: &'a [f64],
    y: &'a [f64],
    cov: &'a [Vec<f64>],
}

impl Rows<'_> {
    /// Design `[1, x, (m), cov...]` restricted to `idx`.
    fn design(&self, idx: &[usize], mediator: Option<&[f64]>) -> DMatrix<f64> {
        let extra = usize::from(mediator.is_some());
        let p = 2 + extra + self.cov.len();
        DMatrix::from_fn(idx.len(), p, |r, c| {
            let i = idx[r];
            match c {
                0 => 1.0,
                1 => self.x[i],
                2 if extra == 1 => mediator.expect("mediator column")[i],
                _ => self.cov[c - 2 - extra][i],
            }
        })
    }

    /// `(a, b)` on the rows `idx`, with `mediator` standing in for `m`.
    fn indirect(&self, idx: &[usize], mediator: &[f64]) -> Result<(f64, f64), StatsError> {
        let mv = DVector::from_iterator(idx.len(), idx.iter().map(|&i| mediator[i]));
        let yv = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i]));
        let a = ols_fit(&self.design(idx, None), &mv)?.coefficients[1];
        let b = ols_fit(&self.design(idx, Some(mediator)), &yv)?.coefficients[2];
        Ok((a, b))
    }
}

pub fn mediate_arrays(
    x: &[f64],
    m: &[f64],
    y: &[f64],
    covariates: &[Vec<f64>],
    cfg: &MediationConfig,
) -> Result<MediationResult, StatsError> {
    let n = x.len();
    for len in [m.len(), y.len()]
        .into_iter()
        .chain(covariates.iter().map(Vec::len))
    {
        if len != n {
            return Err(StatsError::LengthMismatch(n, len));
        }
    }
    if n < covariates.len() + 4 {
        return Err(StatsError::TooFewObservations {
            n,
            needed: covariates.len() + 4,
        });
    }
    if cfg.n_boot == 0 || cfg.n_perm == 0 {
        return Err(StatsError::BadConfig("n_boot and n_perm must be positive".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(StatsError::BadConfig(format!("alpha {} outside (0, 1)", cfg.alpha)));
    }

    let rows = Rows { x, y, cov: covariates };
    let all: Vec<usize> = (0..n).collect();
    let yv = DVector::from_column_slice(y);
    let mv = DVector::from_column_slice(m);

    let fit_a = ols_fit(&rows.design(&all, None), &mv)?;
    let fit_b = ols_fit(&rows.design(&all, Some(m)), &yv)?;
    let fit_c = ols_fit(&rows.design(&all, None), &yv)?;
    let (a, b) = (fit_a.coefficients[1], fit_b.coefficients[2]);
    let ab = a * b;

    // bootstrap
    let boot: Vec<(f64, usize)> = (0..cfg.n_boot)
        .into_par_iter()
        .map(|it| {
            let mut rng = stream_rng(cfg.seed, DOMAIN_BOOTSTRAP, it as u64);
            let mut idx = vec![0usize; n];
            for redraw in 0..=MAX_REDRAWS_PER_ITERATION {
                for slot in idx.iter_mut() {
                    *slot = rng.random_range(0..n);
                }
                match rows.indirect(&idx, m) {
                    Ok((a, b)) => return Ok((a * b, redraw)),
                    Err(StatsError::RankDeficient { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(StatsError::ResampleDegenerate {
                attempts: MAX_REDRAWS_PER_ITERATION,
            })
        })
        .collect::<Result<_, _>>()?;
    let mut redraws: usize = boot.iter().map(|(_, r)| r).sum();
    let mut dist: Vec<f64> = boot.into_iter().map(|(v, _)| v).collect();
    dist.sort_by(f64::total_cmp);

    let (ci_low, ci_high) = bias_corrected_interval(&dist, ab, cfg.alpha);

    // permutation: shuffle covariate-adjusted mediator residuals
    let cov_cols: Vec<&[f64]> = covariates.iter().map(Vec::as_slice).collect();
    let fit_mc = ols_fit(&design_matrix(n, &cov_cols), &mv)?;
    let fitted: Vec<f64> = (0..n).map(|i| m[i] - fit_mc.residuals[i]).collect();
    let resid: Vec<f64> = fit_mc.residuals.iter().copied().collect();
    let threshold = ab.abs();
    let perm: Vec<(bool, usize)> = (0..cfg.n_perm)
        .into_par_iter()
        .map(|it| {
            let mut rng = stream_rng(cfg.seed, DOMAIN_PERMUTATION, it as u64);
            let mut order: Vec<usize> = (0..n).collect();
            let mut m_star = vec![0.0; n];
            for redraw in 0..=MAX_REDRAWS_PER_ITERATION {
                order.shuffle(&mut rng);
                for i in 0..n {
                    m_star[i] = fitted[i] + resid[order[i]];
                }
                match rows.indirect(&all, &m_star) {
                    Ok((a, b)) => return Ok(((a * b).abs() >= threshold, redraw)),
                    Err(StatsError::RankDeficient { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(StatsError::ResampleDegenerate {
                attempts: MAX_REDRAWS_PER_ITERATION,
            })
        })
        .collect::<Result<_, _>>()?;
    redraws += perm.iter().map(|(_, r)| r).sum::<usize>();
    let exceed = perm.iter().filter(|(hit, _)| *hit).count();
    let p_perm = (exceed + 1) as f64 / (cfg.n_perm + 1) as f64;

    Ok(MediationResult {
        a,
        b,
        c_total: fit_c.coefficients[1],
        c_prime: fit_b.coefficients[1],
        ab,
        ci_low,
        ci_high,
        p_perm,
        n_boot: cfg.n_boot,
        n_perm: cfg.n_perm,
        seed: cfg.seed,
        n_used: n,
        redraws,
        ab_outside_ci: ab < ci_low || ab > ci_high,
        path_a: PathEstimate::from_fit(&fit_a, 1),
        path_b: PathEstimate::from_fit(&fit_b, 2),
        path_c: PathEstimate::from_fit(&fit_c, 1),
        path_c_prime: PathEstimate::from_fit(&fit_b, 1),
    })
}

/// Bias-corrected percentile interval from a sorted bootstrap distribution.
///
/// `z0 = Φ⁻¹(#{θ* < θ̂} / B)`; the bounds are the `Φ(2 z0 ± z_{1-α/2})`
/// quantiles. The proportion is kept inside `[1/(2B), 1 - 1/(2B)]` so `z0`
/// stays finite when the estimate lies outside the bootstrap range.
pub(crate) fn bias_corrected_interval(sorted: &[f64], estimate: f64, alpha: f64) -> (f64, f64) {
    let b = sorted.len() as f64;
    let below = sorted.partition_point(|&v| v < estimate) as f64;
    let prop = (below / b).clamp(0.5 / b, 1.0 - 0.5 / b);
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let z0 = normal.inverse_cdf(prop);
    let z = normal.inverse_cdf(1.0 - alpha / 2.0);
    let lo = normal.cdf(2.0 * z0 - z);
    let hi = normal.cdf(2.0 * z0 + z);
    (quantile_sorted(sorted, lo), quantile_sorted(sorted, hi))
}
