//! Generates a synthetic cohort and writes it to a directory.

use ectctl::synth::{generate_cohort, CohortGenSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("ectctl-cohort").display().to_string());
    let spec = CohortGenSpec {
        n_subjects: 20,
        n_nodes: 30,
        seed: 1,
        ..CohortGenSpec::default()
    };
    let cohort = generate_cohort(&spec)?;
    let files = cohort.write_dir(&dir)?;
    println!("{} subjects, {} clamped PSI values", cohort.table.len(), cohort.clamped_psi);
    for r in cohort.table.records.iter().take(5) {
        println!(
            "{}  MC {:.5}  AC {:.5}  PSI {:.2}  response {:.2}",
            r.subject_id,
            r.mc_mean,
            r.ac_mean,
            r.psi.unwrap_or(f64::NAN),
            r.response
        );
    }
    println!("wrote {} files to {dir}", files.len());
    Ok(())
}
