//! Covariate-adjusted F-test of seizure quality on controllability in a
//! synthetic cohort.

use ectctl::stats::{ancova, f_from_partial_eta_sq, Column, Direction};
use ectctl::synth::{generate_cohort, CohortGenSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cohort = generate_cohort(&CohortGenSpec {
        n_subjects: 45,
        n_nodes: 40,
        seed: 2,
        ..CohortGenSpec::default()
    })?;
    let covs = Column::default_covariates();
    for (dep, indep, dir) in [
        (Column::Psi, Column::AcMean, Direction::Positive),
        (Column::Response, Column::Psi, Direction::Negative),
        (Column::Response, Column::McMean, Direction::Positive),
    ] {
        let r = ancova(&cohort.table, dep, indep, &covs, dir)?;
        println!(
            "{dep} ~ {indep}: F({}, {}) = {:.3}  one-sided p = {:.4}  partial eta^2 = {:.3}",
            r.df1, r.df2, r.f_value, r.p_one_sided, r.partial_eta_sq
        );
    }
    println!("F for partial eta^2 0.157 on (1, 39): {:.3}", f_from_partial_eta_sq(0.157, 39));
    Ok(())
}
