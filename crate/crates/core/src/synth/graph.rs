use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::connectome::RawConnectome;
use crate::rng::{stream_rng, DOMAIN_SYNTH};

/// Mean streamline count above the threshold on present edges.
const MEAN_EXTRA_STREAMLINES: f64 = 20.0;
/// Fraction of absent edges that carry a sub-threshold count.
const SUBTHRESHOLD_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphModel {
    ErdosRenyi,
    /// Chung–Lu graph: `P(i~j) ∝ w_i w_j` with log-normal node weights whose
    /// log-scale is drawn per subject from `heterogeneity`.
    ExpectedDegree { heterogeneity: (f64, f64) },
}

/// Edge probabilities for Chung–Lu weights scaled to the target density.
fn chung_lu_probabilities(w: &[f64], density: f64) -> DMatrix<f64> {
    let n = w.len();
    let target = density * (n * (n - 1)) as f64 / 2.0;
    let expected = |c: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += (c * w[i] * w[j]).min(1.0);
            }
        }
        s
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while expected(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (c * w[i] * w[j]).min(1.0) })
}

/// Streamline counts from an edge-presence matrix: present edges get at
/// least `min_streamlines`, absent edges strictly fewer.
fn counts_from_presence<R: Rng>(present: &DMatrix<bool>, min_streamlines: u32, rng: &mut R) -> DMatrix<f64> {
    let n = present.nrows();
    let extra = Exp::new(1.0 / MEAN_EXTRA_STREAMLINES).expect("positive rate");
    let min = f64::from(min_streamlines);
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = if present[(i, j)] {
                min + extra.sample(rng).floor()
            } else if min_streamlines > 1 && rng.random::<f64>() < SUBTHRESHOLD_FRACTION {
                f64::from(rng.random_range(1..min_streamlines))
            } else {
                0.0
            };
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    w
}

fn edge_values<R: Rng>(present: &DMatrix<bool>, range: (f64, f64), rng: &mut R) -> DMatrix<f64> {
    let n = present.nrows();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if present[(i, j)] {
                let v = rng.random_range(range.0..range.1);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
    }
    m
}

pub(crate) fn sample_connectome<R: Rng>(
    n: usize,
    density: f64,
    model: &GraphModel,
    min_streamlines: u32,
    rng: &mut R,
) -> Result<RawConnectome, SynthError> {
    let probs = match model {
        GraphModel::ErdosRenyi => {
            DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { density })
        }
        GraphModel::ExpectedDegree { heterogeneity } => {
            let sigma = if heterogeneity.1 > heterogeneity.0 {
                rng.random_range(heterogeneity.0..heterogeneity.1)
            } else {
                heterogeneity.0
            };
            let ln = LogNormal::new(0.0, sigma).map_err(|e| SynthError::Spec(e.to_string()))?;
            let w: Vec<f64> = (0..n).map(|_| ln.sample(rng)).collect();
            chung_lu_probabilities(&w, density)
        }
    };
    let mut present = DMatrix::from_element(n, n, false);
    for i in 0..n {
        for j in (i + 1)..n {
            let e = rng.random::<f64>() < probs[(i, j)];
            present[(i, j)] = e;
            present[(j, i)] = e;
        }
    }
    let weights = counts_from_presence(&present, min_streamlines, rng);
    let fa = edge_values(&present, (0.3, 0.6), rng);
    let md = edge_values(&present, (0.6e-3, 1.0e-3), rng);
    Ok(RawConnectome::from_matrix(weights)?.with_fa(fa)?.with_md(md)?)
}

/// Erdős–Rényi streamline-count matrix whose edges at or above
/// `min_streamlines` occur independently with probability `density`.
pub fn generate_connectome(
    n: usize,
    density: f64,
    min_streamlines: u32,
    seed: u64,
) -> Result<RawConnectome, SynthError> {
    if !(density > 0.0 && density < 1.0) {
        return Err(SynthError::Spec(format!("density {density} outside (0, 1)")));
    }
    if min_streamlines < 1 {
        return Err(SynthError::Spec("min_streamlines must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, DOMAIN_SYNTH, 0);
    sample_connectome(n, density, &GraphModel::ErdosRenyi, min_streamlines, &mut rng)
}
