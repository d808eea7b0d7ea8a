//! Bootstrap mediation of the controllability to response effect through
//! seizure quality.

use ectctl::stats::{mediate, Column, MediationConfig};
use ectctl::synth::{generate_cohort, CohortGenSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cohort = generate_cohort(&CohortGenSpec {
        n_subjects: 80,
        n_nodes: 30,
        seed: 4,
        ..CohortGenSpec::default()
    })?;
    let cfg = MediationConfig {
        n_boot: 2000,
        n_perm: 2000,
        ..MediationConfig::default()
    };
    let r = mediate(
        &cohort.table,
        Column::AcMean,
        Column::Psi,
        Column::Response,
        &Column::default_covariates(),
        &cfg,
    )?;
    println!("a = {:.4}  b = {:.4}  c = {:.4}  c' = {:.4}", r.a, r.b, r.c_total, r.c_prime);
    println!("ab = {:.4}  95% CI [{:.4}, {:.4}]  permutation p = {:.4}", r.ab, r.ci_low, r.ci_high, r.p_perm);
    Ok(())
}
