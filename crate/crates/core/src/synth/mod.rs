//! Synthetic connectomes and cohorts with planted effects.
//!
//! Each subject gets a random graph whose density (and, for the
//! expected-degree model, degree heterogeneity) is drawn per subject, which
//! spreads whole-brain controllability across the cohort. PSI and treatment
//! response are then generated from
//!
//! ```text
//! psi      = β0 + β1·ac + ε_m
//! response = γ0 + γ1·psi + γ2·mc + ε_y
//! ```
//!
//! where `ac` and `mc` are the subject's whole-brain controllability values,
//! optionally z-scored across the cohort.

mod graph;

pub use graph::{generate_connectome, GraphModel};

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connectome::{prepare, save_matrix_csv, ConnectomeError, RawConnectome};
use crate::control::{controllability_profile, ControlError, ControllabilityProfile};
use crate::rng::{stream_rng, DOMAIN_SYNTH};
use crate::stats::{CohortRecord, CohortTable, StatsError};

const NOISE_STREAM_BASE: u64 = 1 << 40;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid cohort spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Connectome(#[from] ConnectomeError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Scale of `ac` and `mc` in the planted equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorScale {
    Raw,
    /// z-scored across the generated cohort.
    Standardized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortGenSpec {
    pub n_subjects: usize,
    pub n_nodes: usize,
    pub graph: GraphModel,
    pub density: (f64, f64),
    pub min_streamlines: u32,
    pub beta0: f64,
    pub beta1: f64,
    pub sigma_m: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub sigma_y: f64,
    pub predictor_scale: PredictorScale,
    /// Residualise the noise vectors against the regressors of the planted
    /// model, so least squares recovers the coefficients exactly.
    pub orthogonalize_noise: bool,
    pub age: (f64, f64),
    /// Probability of sex code 1.
    pub sex_p: f64,
    pub pre_severity: (f64, f64),
    pub seed: u64,
}

impl Default for CohortGenSpec {
    fn default() -> Self {
        Self {
            n_subjects: 100,
            n_nodes: 114,
            graph: GraphModel::ExpectedDegree {
                heterogeneity: (0.0, 1.0),
            },
            density: (0.02, 0.06),
            min_streamlines: 3,
            beta0: 70.0,
            beta1: 8.0,
            sigma_m: 6.0,
            gamma0: 5.0,
            gamma1: -0.25,
            gamma2: 2.0,
            sigma_y: 3.0,
            predictor_scale: PredictorScale::Standardized,
            orthogonalize_noise: false,
            age: (18.0, 80.0),
            sex_p: 0.5,
            pre_severity: (24.0, 5.0),
            seed: 0,
        }
    }
}

impl CohortGenSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Spec(m));
        if self.n_subjects < 3 {
            return bad(format!("n_subjects {} < 3", self.n_subjects));
        }
        if self.n_nodes < 2 {
            return bad(format!("n_nodes {} < 2", self.n_nodes));
        }
        let (lo, hi) = self.density;
        if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
            return bad(format!("density range ({lo}, {hi}) must lie in (0, 1)"));
        }
        if self.min_streamlines < 1 {
            return bad("min_streamlines must be at least 1".into());
        }
        if !(self.sigma_m >= 0.0 && self.sigma_y >= 0.0) {
            return bad("noise scales must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.sex_p) {
            return bad(format!("sex_p {} outside [0, 1]", self.sex_p));
        }
        if !(self.age.0 <= self.age.1 && self.pre_severity.1 >= 0.0) {
            return bad("invalid covariate distribution".into());
        }
        if let GraphModel::ExpectedDegree { heterogeneity: (a, b) } = self.graph {
            if !(a >= 0.0 && a <= b) {
                return bad(format!("heterogeneity range ({a}, {b}) invalid"));
            }
        }
        let coefs = [self.beta0, self.beta1, self.gamma0, self.gamma1, self.gamma2];
        if coefs.iter().any(|c| !c.is_finite()) {
            return bad("coefficients must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub spec: CohortGenSpec,
    pub table: CohortTable,
    pub connectomes: Vec<RawConnectome>,
    pub profiles: Vec<ControllabilityProfile>,
    /// Subjects whose PSI fell outside [0, 100] and was clamped.
    pub clamped_psi: usize,
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    generator: &'static str,
    version: &'static str,
    spec: &'a CohortGenSpec,
    clamped_psi: usize,
    files: Vec<String>,
}

struct Subject {
    raw: RawConnectome,
    profile: ControllabilityProfile,
    age: f64,
    sex: f64,
    pre: f64,
}

fn subject_id(i: usize) -> String {
    format!("sub-{:04}", i + 1)
}

fn zscore(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd == 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - m) / sd).collect()
}

/// Draws `n` standard-normal values from stream `index`, optionally
/// residualised against `[1, regressors...]` and rescaled to unit sample
/// standard deviation.
fn noise(seed: u64, index: u64, n: usize, orthogonal_to: Option<&[&[f64]]>) -> Vec<f64> {
    let mut rng = stream_rng(seed, DOMAIN_SYNTH, NOISE_STREAM_BASE + index);
    let e: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let Some(cols) = orthogonal_to else {
        return e;
    };
    let x = DMatrix::from_fn(n, cols.len() + 1, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
    let ev = DVector::from_vec(e);
    let qr = x.qr();
    let q = qr.q();
    let resid = &ev - &q * (q.transpose() * &ev);
    let sd = (resid.norm_squared() / (n as f64 - 1.0)).sqrt();
    if sd == 0.0 {
        return vec![0.0; n];
    }
    resid.iter().map(|v| v / sd).collect()
}

pub fn generate_cohort(spec: &CohortGenSpec) -> Result<SyntheticCohort, SynthError> {
    spec.validate()?;
    let pre_dist = Normal::new(spec.pre_severity.0, spec.pre_severity.1)
        .map_err(|e| SynthError::Spec(e.to_string()))?;
    let subjects: Vec<Subject> = (0..spec.n_subjects)
        .into_par_iter()
        .map(|i| -> Result<Subject, SynthError> {
            let mut rng = stream_rng(spec.seed, DOMAIN_SYNTH, 1 + i as u64);
            let density = if spec.density.1 > spec.density.0 {
                rng.random_range(spec.density.0..spec.density.1)
            } else {
                spec.density.0
            };
            let raw = graph::sample_connectome(spec.n_nodes, density, &spec.graph, spec.min_streamlines, &mut rng)?;
            let profile = controllability_profile(&prepare(&raw, spec.min_streamlines)?)?;
            let age = if spec.age.1 > spec.age.0 {
                rng.random_range(spec.age.0..spec.age.1)
            } else {
                spec.age.0
            };
            let sex = f64::from(u8::from(rng.random::<f64>() < spec.sex_p));
            let pre = pre_dist.sample(&mut rng);
            Ok(Subject {
                raw,
                profile,
                age,
                sex,
                pre,
            })
        })
        .collect::<Result<_, _>>()?;

    let n = subjects.len();
    let ac_raw: Vec<f64> = subjects.iter().map(|s| s.profile.ac_mean).collect();
    let mc_raw: Vec<f64> = subjects.iter().map(|s| s.profile.mc_mean).collect();
    let (ac, mc) = match spec.predictor_scale {
        PredictorScale::Raw => (ac_raw.clone(), mc_raw.clone()),
        PredictorScale::Standardized => (zscore(&ac_raw), zscore(&mc_raw)),
    };
    let age: Vec<f64> = subjects.iter().map(|s| s.age).collect();
    let sex: Vec<f64> = subjects.iter().map(|s| s.sex).collect();
    let pre: Vec<f64> = subjects.iter().map(|s| s.pre).collect();
    let edges: Vec<f64> = subjects.iter().map(|s| s.profile.edge_count as f64).collect();

    let base: Vec<&[f64]> = vec![&ac_raw, &mc_raw, &age, &sex, &pre, &edges];
    let e_m = noise(spec.seed, 0, n, spec.orthogonalize_noise.then_some(base.as_slice()));
    let mut clamped_psi = 0;
    let psi: Vec<f64> = (0..n)
        .map(|i| {
            let v = spec.beta0 + spec.beta1 * ac[i] + spec.sigma_m * e_m[i];
            if !(0.0..=100.0).contains(&v) {
                clamped_psi += 1;
            }
            v.clamp(0.0, 100.0)
        })
        .collect();
    let mut with_psi = base.clone();
    with_psi.push(&psi);
    let e_y = noise(spec.seed, 1, n, spec.orthogonalize_noise.then_some(with_psi.as_slice()));
    if clamped_psi > 0 {
        log::warn!("{clamped_psi} synthetic PSI values clamped to [0, 100]");
    }

    let records = (0..n)
        .map(|i| {
            let response = spec.gamma0 + spec.gamma1 * psi[i] + spec.gamma2 * mc[i] + spec.sigma_y * e_y[i];
            CohortRecord {
                subject_id: subject_id(i),
                age: age[i],
                sex: sex[i],
                pre_severity: pre[i],
                post_severity: pre[i] + response,
                response,
                psi: Some(psi[i]),
                mc_mean: mc_raw[i],
                ac_mean: ac_raw[i],
                edge_count: edges[i],
            }
        })
        .collect();
    let table = CohortTable::new(records)?;
    let (connectomes, profiles) = subjects.into_iter().map(|s| (s.raw, s.profile)).unzip();
    Ok(SyntheticCohort {
        spec: spec.clone(),
        table,
        connectomes,
        profiles,
        clamped_psi,
    })
}

impl SyntheticCohort {
    /// Writes `cohort.csv`, `matrices/<subject>_{streamlines,fa,md}.csv` and
    /// `provenance.json` under `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, SynthError> {
        let dir = dir.as_ref();
        let mdir = dir.join("matrices");
        std::fs::create_dir_all(&mdir)?;
        let mut files = vec![dir.join("cohort.csv")];
        self.table.write_csv(&files[0])?;
        for (i, raw) in self.connectomes.iter().enumerate() {
            let id = subject_id(i);
            let mats = [("streamlines", Some(raw.weights())), ("fa", raw.fa()), ("md", raw.md())];
            for (kind, m) in mats {
                if let Some(m) = m {
                    let path = mdir.join(format!("{id}_{kind}.csv"));
                    save_matrix_csv(m, std::fs::File::create(&path)?)?;
                    files.push(path);
                }
            }
        }
        let prov = Provenance {
            generator: "ectctl::synth",
            version: env!("CARGO_PKG_VERSION"),
            spec: &self.spec,
            clamped_psi: self.clamped_psi,
            files: files
                .iter()
                .map(|p| p.strip_prefix(dir).unwrap_or(p).display().to_string())
                .collect(),
        };
        let path = dir.join("provenance.json");
        std::fs::write(&path, serde_json::to_string_pretty(&prov)?)?;
        files.push(path);
        Ok(files)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mediate, Column, MediationConfig};
    use approx::assert_relative_eq;

    fn small(seed: u64) -> CohortGenSpec {
        CohortGenSpec {
            n_subjects: 30,
            n_nodes: 20,
            seed,
            ..CohortGenSpec::default()
        }
    }

    #[test]
    fn reproducible() {
        let a = generate_cohort(&small(4)).unwrap();
        let b = generate_cohort(&small(4)).unwrap();
        assert_eq!(a.table, b.table);
        let c = generate_cohort(&small(5)).unwrap();
        assert_ne!(a.table, c.table);
    }

    #[test]
    fn orthogonal_noise_gives_exact_paths() {
        let spec = CohortGenSpec {
            sigma_y: 0.0,
            gamma2: 0.0,
            orthogonalize_noise: true,
            ..small(7)
        };
        let c = generate_cohort(&spec).unwrap();
        assert_eq!(c.clamped_psi, 0);
        let cfg = MediationConfig {
            n_boot: 50,
            n_perm: 50,
            ..MediationConfig::default()
        };
        // standardised ac enters psi with slope β1 / sd(ac)
        let r = mediate(
            &c.table,
            Column::AcMean,
            Column::Psi,
            Column::Response,
            &Column::default_covariates(),
            &cfg,
        )
        .unwrap();
        let ac: Vec<f64> = c.table.records.iter().map(|r| r.ac_mean).collect();
        let m = ac.iter().sum::<f64>() / ac.len() as f64;
        let sd = (ac.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (ac.len() as f64 - 1.0)).sqrt();
        assert_relative_eq!(r.a, spec.beta1 / sd, max_relative = 1e-9);
        assert_relative_eq!(r.b, spec.gamma1, max_relative = 1e-9);
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            CohortGenSpec { density: (0.0, 0.2), ..small(0) },
            CohortGenSpec { sigma_m: -1.0, ..small(0) },
            CohortGenSpec { n_subjects: 1, ..small(0) },
        ] {
            assert!(matches!(generate_cohort(&spec), Err(SynthError::Spec(_))));
        }
    }

    #[test]
    fn directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        let c = generate_cohort(&CohortGenSpec { n_subjects: 4, ..small(1) }).unwrap();
        c.write_dir(dir.path()).unwrap();
        assert!(dir.path().join("cohort.csv").exists());
        assert!(dir.path().join("matrices/sub-0004_fa.csv").exists());
        let prov: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("provenance.json")).unwrap()).unwrap();
        assert_eq!(prov["spec"]["seed"], 1);
        let back = CohortTable::read_csv(dir.path().join("cohort.csv")).unwrap();
        assert_eq!(back, c.table);
    }
}
