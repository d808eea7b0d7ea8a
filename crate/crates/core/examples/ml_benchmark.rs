//! Nested leave-one-out benchmark of the default pipelines on nodal
//! controllability features, next to single-feature regressions.

use nalgebra::DMatrix;

use ectctl::mlbench::{default_space, run_benchmark, FeatureSet, Target};
use ectctl::synth::{generate_cohort, CohortGenSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cohort = generate_cohort(&CohortGenSpec {
        n_subjects: 30,
        n_nodes: 16,
        seed: 9,
        ..CohortGenSpec::default()
    })?;
    let ids: Vec<String> = cohort.table.records.iter().map(|r| r.subject_id.clone()).collect();
    let n = ids.len();
    let nodes = cohort.profiles[0].n();
    let nodal = |f: fn(&ectctl::control::ControllabilityProfile) -> &Vec<f64>| {
        DMatrix::from_fn(n, nodes, |i, j| f(&cohort.profiles[i])[j])
    };
    let modalities = vec![
        FeatureSet { name: "mc_nodal".into(), subject_ids: ids.clone(), matrix: nodal(|p| &p.mc_nodal) },
        FeatureSet { name: "ac_nodal".into(), subject_ids: ids.clone(), matrix: nodal(|p| &p.ac_nodal) },
    ];
    let target = Target {
        subject_ids: ids,
        values: cohort.table.records.iter().map(|r| r.response).collect(),
    };
    let single = vec![
        ("mc_mean".to_string(), cohort.table.records.iter().map(|r| r.mc_mean).collect()),
        ("ac_mean".to_string(), cohort.table.records.iter().map(|r| r.ac_mean).collect()),
    ];

    let table = run_benchmark(&default_space(1), &modalities, &target, &single)?;
    for r in &table.rows {
        println!("{:<9} {:<14} VE {:>8.2}%", r.modality, r.pipeline, r.variance_explained);
    }
    for s in &table.single_feature {
        println!("single {:<9} VE {:>8.2}%", s.feature, s.variance_explained);
    }
    Ok(())
}
