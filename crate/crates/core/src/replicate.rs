//! The four cohort analyses run in sequence:
//!
//! 1. PSI on whole-brain modal (negative) and average (positive)
//!    controllability.
//! 2. Treatment response on PSI (negative).
//! 3. Treatment response on modal (positive) and average (negative)
//!    controllability.
//! 4. Mediation of the controllability → response effect by PSI.
//!
//! Every model adjusts for the same covariates.

use serde::{Deserialize, Serialize};

use crate::stats::{
    ancova, mediate, AncovaResult, CohortTable, Column, Direction, MediationConfig, MediationResult,
    StatsError,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateConfig {
    pub covariates: Vec<Column>,
    pub mediation: MediationConfig,
    pub alpha: f64,
}

impl Default for ReplicateConfig {
    fn default() -> Self {
        Self {
            covariates: Column::default_covariates(),
            mediation: MediationConfig::default(),
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncovaEntry {
    pub dependent: Column,
    pub independent: Column,
    pub result: AncovaResult,
    pub significant: bool,
}

/// Path values laid out as in the usual triangle diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediationDiagram {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub c_prime: f64,
    pub ab: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediationEntry {
    pub predictor: Column,
    pub mediator: Column,
    pub outcome: Column,
    pub expected_ab: Direction,
    pub diagram: MediationDiagram,
    pub result: MediationResult,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub n_subjects: usize,
    pub covariates: Vec<Column>,
    pub alpha: f64,
    pub psi_on_controllability: Vec<AncovaEntry>,
    pub response_on_psi: Vec<AncovaEntry>,
    pub response_on_controllability: Vec<AncovaEntry>,
    pub mediation: Vec<MediationEntry>,
}

impl ReplicationReport {
    pub fn all_significant(&self) -> bool {
        self.psi_on_controllability
            .iter()
            .chain(&self.response_on_psi)
            .chain(&self.response_on_controllability)
            .all(|e| e.significant)
            && self.mediation.iter().all(|m| m.significant)
    }
}

fn run_ancova(
    cohort: &CohortTable,
    dependent: Column,
    independent: Column,
    direction: Direction,
    cfg: &ReplicateConfig,
) -> Result<AncovaEntry, StatsError> {
    let result = ancova(cohort, dependent, independent, &cfg.covariates, direction)?;
    Ok(AncovaEntry {
        dependent,
        independent,
        significant: result.p_one_sided < cfg.alpha,
        result,
    })
}

pub fn replicate(cohort: &CohortTable, cfg: &ReplicateConfig) -> Result<ReplicationReport, StatsError> {
    use Column::*;
    use Direction::*;
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(StatsError::BadConfig(format!("alpha {} outside (0, 1)", cfg.alpha)));
    }
    let psi_on_controllability = vec![
        run_ancova(cohort, Psi, McMean, Negative, cfg)?,
        run_ancova(cohort, Psi, AcMean, Positive, cfg)?,
    ];
    let response_on_psi = vec![run_ancova(cohort, Response, Psi, Negative, cfg)?];
    let response_on_controllability = vec![
        run_ancova(cohort, Response, McMean, Positive, cfg)?,
        run_ancova(cohort, Response, AcMean, Negative, cfg)?,
    ];
    let mut mediation = Vec::new();
    for (predictor, expected_ab) in [(McMean, Positive), (AcMean, Negative)] {
        let result = mediate(cohort, predictor, Psi, Response, &cfg.covariates, &cfg.mediation)?;
        let excludes_zero = result.ci_low > 0.0 || result.ci_high < 0.0;
        mediation.push(MediationEntry {
            predictor,
            mediator: Psi,
            outcome: Response,
            expected_ab,
            diagram: MediationDiagram {
                a: result.a,
                b: result.b,
                c: result.c_total,
                c_prime: result.c_prime,
                ab: result.ab,
            },
            significant: excludes_zero && result.p_perm < cfg.alpha && expected_ab.matches(result.ab),
            result,
        });
    }
    Ok(ReplicationReport {
        n_subjects: cohort.len(),
        covariates: cfg.covariates.clone(),
        alpha: cfg.alpha,
        psi_on_controllability,
        response_on_psi,
        response_on_controllability,
        mediation,
    })
}
