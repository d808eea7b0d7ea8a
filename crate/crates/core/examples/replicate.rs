//! Runs the full battery of ANCOVA and mediation tests on a planted
//! synthetic cohort.

use ectctl::replicate::{replicate, ReplicateConfig};
use ectctl::stats::MediationConfig;
use ectctl::synth::{generate_cohort, CohortGenSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cohort = generate_cohort(&CohortGenSpec {
        n_subjects: 120,
        n_nodes: 30,
        seed: 12,
        ..CohortGenSpec::default()
    })?;
    let cfg = ReplicateConfig {
        mediation: MediationConfig {
            n_boot: 1000,
            n_perm: 1000,
            ..MediationConfig::default()
        },
        ..ReplicateConfig::default()
    };
    let report = replicate(&cohort.table, &cfg)?;
    for e in report
        .psi_on_controllability
        .iter()
        .chain(&report.response_on_psi)
        .chain(&report.response_on_controllability)
    {
        println!(
            "{} ~ {}: F = {:.3}  p = {:.4}  {}",
            e.dependent,
            e.independent,
            e.result.f_value,
            e.result.p_one_sided,
            if e.significant { "significant" } else { "n.s." }
        );
    }
    for m in &report.mediation {
        println!(
            "{} -> {} -> {}: ab = {:.4}  CI [{:.4}, {:.4}]  {}",
            m.predictor,
            m.mediator,
            m.outcome,
            m.result.ab,
            m.result.ci_low,
            m.result.ci_high,
            if m.significant { "significant" } else { "n.s." }
        );
    }
    println!("all significant: {}", report.all_significant());
    Ok(())
}
