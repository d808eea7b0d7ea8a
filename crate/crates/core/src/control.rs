//! Modal and average controllability of the linear network model
//! `x(k+1) = A x(k) + B u(k)`.
//!
//! For a symmetric `A = V Ξ Vᵀ` the nodal quantities are
//!
//! * modal: `MC_i = Σ_j (1 - ξ_j²) v_ij²`
//! * average: `AC_i = Σ_j v_ij² / (1 - ξ_j²)`, the trace of the
//!   controllability Gramian with `B = e_i`.
//!
//! Because the rows of `V` have unit norm too, their whole-brain means reduce
//! to functions of the spectrum alone: `MC̄ = 1 - mean(ξ²)` and
//! `AC̄ = mean(1 / (1 - ξ²))`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connectome::ConnectomeMatrix;
use crate::linalg::{self, LinalgError};

/// Eigenvalues whose magnitude exceeds `1 - CONDITIONING_MARGIN` make the
/// Gramian numerically meaningless and are rejected.
pub const CONDITIONING_MARGIN: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("system is unstable: spectral radius {0} >= 1")]
    Unstable(f64),
    #[error("eigenvalue {0} is within {CONDITIONING_MARGIN:e} of the unit circle")]
    IllConditioned(f64),
    #[error("control node set is empty")]
    EmptyControlSet,
    #[error("control node {node} out of range for {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("Gramian series did not reach tolerance {tol:e} within {terms} terms")]
    HorizonExhausted { terms: usize, tol: f64 },
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal; column `j` pairs with `eigenvalues[j]`.
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `‖VᵀV − I‖_F`
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.n();
        (self.eigenvectors.transpose() * &self.eigenvectors - DMatrix::<f64>::identity(n, n)).norm()
    }

    /// `‖A − VΞVᵀ‖_F`
    pub fn reconstruction_residual(&self, a: &DMatrix<f64>) -> f64 {
        let v = &self.eigenvectors;
        (a - v * DMatrix::from_diagonal(&self.eigenvalues) * v.transpose()).norm()
    }

    fn check_strictly_stable(&self) -> Result<(), ControlError> {
        match self.eigenvalues.iter().find(|x| x.abs() >= 1.0) {
            Some(&x) => Err(ControlError::Unstable(x.abs())),
            None => Ok(()),
        }
    }

    fn check_conditioned(&self) -> Result<(), ControlError> {
        self.check_strictly_stable()?;
        match self
            .eigenvalues
            .iter()
            .find(|x| x.abs() > 1.0 - CONDITIONING_MARGIN)
        {
            Some(&x) => Err(ControlError::IllConditioned(x)),
            None => Ok(()),
        }
    }
}

pub fn spectral_decompose(m: &ConnectomeMatrix) -> Result<SpectralDecomposition, ControlError> {
    let eig = linalg::symmetric_eigen(m.adjacency())?;
    Ok(SpectralDecomposition {
        eigenvalues: eig.eigenvalues,
        eigenvectors: eig.eigenvectors,
    })
}

pub fn modal_controllability_nodal(d: &SpectralDecomposition) -> Result<DVector<f64>, ControlError> {
    d.check_strictly_stable()?;
    let weights = d.eigenvalues.map(|x| 1.0 - x * x);
    Ok(weighted_row_sums(&d.eigenvectors, &weights))
}

pub fn average_controllability_nodal(d: &SpectralDecomposition) -> Result<DVector<f64>, ControlError> {
    d.check_conditioned()?;
    let weights = d.eigenvalues.map(|x| 1.0 / (1.0 - x * x));
    Ok(weighted_row_sums(&d.eigenvectors, &weights))
}

/// `out_i = Σ_j w_j v_ij²`
fn weighted_row_sums(v: &DMatrix<f64>, w: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(v.nrows(), |i, _| {
        v.row(i)
            .iter()
            .zip(w.iter())
            .map(|(x, wj)| wj * x * x)
            .sum()
    })
}

/// Whole-brain modal controllability, `1 - mean(ξ²)`.
pub fn whole_brain_mc(d: &SpectralDecomposition) -> Result<f64, ControlError> {
    d.check_strictly_stable()?;
    let n = d.n() as f64;
    Ok(1.0 - d.eigenvalues.iter().map(|x| x * x).sum::<f64>() / n)
}

/// Whole-brain average controllability, `mean(1 / (1 - ξ²))`.
pub fn whole_brain_ac(d: &SpectralDecomposition) -> Result<f64, ControlError> {
    d.check_conditioned()?;
    let n = d.n() as f64;
    Ok(d.eigenvalues.iter().map(|x| 1.0 / (1.0 - x * x)).sum::<f64>() / n)
}

/// How many terms of the Gramian series to accumulate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    /// Terms `t = 0 .. T-1`.
    Fixed(usize),
    /// Stop once a term adds less than `tol` (relative to the running total,
    /// floored at 1); fail after `cap` terms.
    Adaptive { tol: f64, cap: usize },
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon::Adaptive {
            tol: 1e-14,
            cap: 100_000,
        }
    }
}

/// Trace of the controllability Gramian `Σ_t A^t B Bᵀ (Aᵀ)^t`, where `B`
/// selects `control_nodes`, summed term by term as `Σ_t ‖A^t B‖_F²`.
pub fn gramian_trace(
    m: &ConnectomeMatrix,
    control_nodes: &[usize],
    horizon: Horizon,
) -> Result<f64, ControlError> {
    if control_nodes.is_empty() {
        return Err(ControlError::EmptyControlSet);
    }
    let n = m.n();
    if let Some(&node) = control_nodes.iter().find(|&&i| i >= n) {
        return Err(ControlError::NodeOutOfRange { node, n });
    }
    if let Horizon::Adaptive { .. } = horizon {
        if !m.is_stable() {
            return Err(ControlError::Unstable(m.spectral_radius()));
        }
    }

    let a = m.adjacency();
    let mut x = DMatrix::<f64>::zeros(n, control_nodes.len());
    for (col, &node) in control_nodes.iter().enumerate() {
        x[(node, col)] = 1.0;
    }
    let mut total = 0.0;
    match horizon {
        Horizon::Fixed(terms) => {
            for _ in 0..terms {
                total += x.norm_squared();
                x = a * &x;
            }
            Ok(total)
        }
        Horizon::Adaptive { tol, cap } => {
            for _ in 0..cap {
                let term = x.norm_squared();
                total += term;
                if term < tol * total.max(1.0) {
                    return Ok(total);
                }
                x = a * &x;
            }
            Err(ControlError::HorizonExhausted { terms: cap, tol })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllabilityProfile {
    pub mc_nodal: Vec<f64>,
    pub ac_nodal: Vec<f64>,
    pub mc_mean: f64,
    pub ac_mean: f64,
    pub edge_count: usize,
}

impl ControllabilityProfile {
    pub fn n(&self) -> usize {
        self.mc_nodal.len()
    }

    /// One CSV row `subject,mc_mean,ac_mean,edge_count[,mc_0..,ac_0..]`.
    pub fn csv_row(&self, subject: &str, with_nodal: bool) -> Vec<String> {
        let mut row = vec![
            subject.to_string(),
            self.mc_mean.to_string(),
            self.ac_mean.to_string(),
            self.edge_count.to_string(),
        ];
        if with_nodal {
            row.extend(self.mc_nodal.iter().map(f64::to_string));
            row.extend(self.ac_nodal.iter().map(f64::to_string));
        }
        row
    }

    pub fn csv_header(n: usize, with_nodal: bool) -> Vec<String> {
        let mut row: Vec<String> = ["subject", "mc_mean", "ac_mean", "edge_count"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        if with_nodal {
            row.extend((0..n).map(|i| format!("mc_{i}")));
            row.extend((0..n).map(|i| format!("ac_{i}")));
        }
        row
    }
}

/// Nodal and whole-brain modal/average controllability of a stabilised
/// connectome.
pub fn controllability_profile(m: &ConnectomeMatrix) -> Result<ControllabilityProfile, ControlError> {
    let d = spectral_decompose(m)?;
    Ok(ControllabilityProfile {
        mc_nodal: modal_controllability_nodal(&d)?.iter().copied().collect(),
        ac_nodal: average_controllability_nodal(&d)?.iter().copied().collect(),
        mc_mean: whole_brain_mc(&d)?,
        ac_mean: whole_brain_ac(&d)?,
        edge_count: m.edge_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectome::{stabilize, threshold_binarize, RawConnectome};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scaled_identity(n: usize, c: f64) -> ConnectomeMatrix {
        ConnectomeMatrix::from_adjacency(DMatrix::<f64>::identity(n, n) * c).unwrap()
    }

    fn random_stabilized(n: usize, seed: u64) -> ConnectomeMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = DMatrix::from_fn(n, n, |_, _| 0.0);
        let mut w = w;
        for i in 0..n {
            for j in (i + 1)..n {
                let c = if rng.random_bool(0.3) { 5.0 } else { 0.0 };
                w[(i, j)] = c;
                w[(j, i)] = c;
            }
        }
        stabilize(&threshold_binarize(&RawConnectome::from_matrix(w).unwrap(), 3).unwrap())
    }

    #[test]
    fn zero_matrix() {
        let z = ConnectomeMatrix::zeros(5);
        let d = spectral_decompose(&z).unwrap();
        assert!(modal_controllability_nodal(&d).unwrap().iter().all(|&x| (x - 1.0).abs() < 1e-15));
        assert!(average_controllability_nodal(&d).unwrap().iter().all(|&x| (x - 1.0).abs() < 1e-15));
        assert_eq!(whole_brain_mc(&d).unwrap(), 1.0);
        assert_eq!(whole_brain_ac(&d).unwrap(), 1.0);
        assert_eq!(gramian_trace(&z, &[2], Horizon::default()).unwrap(), 1.0);
        let p = controllability_profile(&z).unwrap();
        assert_eq!((p.mc_mean, p.ac_mean), (1.0, 1.0));
    }

    #[test]
    fn half_identity() {
        let m = scaled_identity(4, 0.5);
        let d = spectral_decompose(&m).unwrap();
        for x in modal_controllability_nodal(&d).unwrap().iter() {
            assert_abs_diff_eq!(*x, 0.75, epsilon = 1e-15);
        }
        for x in average_controllability_nodal(&d).unwrap().iter() {
            assert_abs_diff_eq!(*x, 4.0 / 3.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(whole_brain_mc(&d).unwrap(), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(whole_brain_ac(&d).unwrap(), 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            gramian_trace(&m, &[1], Horizon::default()).unwrap(),
            4.0 / 3.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn two_node_edge_mc() {
        let m = ConnectomeMatrix::from_adjacency(DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]))
            .unwrap();
        let d = spectral_decompose(&m).unwrap();
        let mc = modal_controllability_nodal(&d).unwrap();
        // 1 - 0.25 * 0.5 - 0.25 * 0.5
        assert_abs_diff_eq!(mc[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(mc[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn nodal_ac_matches_single_node_gramian() {
        let m = random_stabilized(30, 7);
        let d = spectral_decompose(&m).unwrap();
        let ac = average_controllability_nodal(&d).unwrap();
        for i in [0, 13, 29] {
            let g = gramian_trace(&m, &[i], Horizon::default()).unwrap();
            assert_abs_diff_eq!(g, ac[i], epsilon = 1e-8);
        }
        let all: Vec<usize> = (0..30).collect();
        let g = gramian_trace(&m, &all, Horizon::default()).unwrap();
        assert_abs_diff_eq!(g, 30.0 * whole_brain_ac(&d).unwrap(), epsilon = 1e-8);
    }

    #[test]
    fn fixed_horizon_monotone_and_converges() {
        let m = random_stabilized(15, 3);
        let closed = average_controllability_nodal(&spectral_decompose(&m).unwrap()).unwrap()[4];
        let mut prev = 0.0;
        for t in [0, 1, 2, 5, 10, 50, 400] {
            let g = gramian_trace(&m, &[4], Horizon::Fixed(t)).unwrap();
            assert!(g >= prev);
            prev = g;
        }
        assert_abs_diff_eq!(prev, closed, epsilon = 1e-10);
    }

    #[test]
    fn profile_is_deterministic_and_consistent() {
        let m = random_stabilized(25, 5);
        let p1 = controllability_profile(&m).unwrap();
        let p2 = controllability_profile(&m).unwrap();
        assert_eq!(p1, p2);
        let mean_mc = p1.mc_nodal.iter().sum::<f64>() / 25.0;
        let mean_ac = p1.ac_nodal.iter().sum::<f64>() / 25.0;
        assert_abs_diff_eq!(mean_mc, p1.mc_mean, epsilon = 1e-10);
        assert_abs_diff_eq!(mean_ac, p1.ac_mean, epsilon = 1e-10);
        assert!(p1.ac_nodal.iter().all(|&x| x >= 1.0));
        assert!(p1.mc_mean > 0.0 && p1.mc_mean <= 1.0);
        assert_eq!(p1.edge_count, m.edge_count());
    }

    #[test]
    fn errors() {
        let unstable = scaled_identity(3, 1.0);
        let d = spectral_decompose(&unstable).unwrap();
        assert!(matches!(whole_brain_ac(&d), Err(ControlError::Unstable(_))));
        assert!(matches!(
            modal_controllability_nodal(&d),
            Err(ControlError::Unstable(_))
        ));
        let edge = scaled_identity(3, 1.0 - 1e-10);
        let d = spectral_decompose(&edge).unwrap();
        assert!(matches!(whole_brain_ac(&d), Err(ControlError::IllConditioned(_))));
        assert!(whole_brain_mc(&d).is_ok());

        let z = ConnectomeMatrix::zeros(3);
        assert!(matches!(
            gramian_trace(&z, &[], Horizon::default()),
            Err(ControlError::EmptyControlSet)
        ));
        assert!(matches!(
            gramian_trace(&z, &[3], Horizon::default()),
            Err(ControlError::NodeOutOfRange { node: 3, n: 3 })
        ));
        assert!(matches!(
            gramian_trace(&unstable, &[0], Horizon::default()),
            Err(ControlError::Unstable(_))
        ));
        let slow = scaled_identity(2, 0.999);
        assert!(matches!(
            gramian_trace(&slow, &[0], Horizon::Adaptive { tol: 1e-14, cap: 10 }),
            Err(ControlError::HorizonExhausted { .. })
        ));
    }
}
