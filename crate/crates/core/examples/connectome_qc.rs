//! Flags a subject whose streamline counts are inflated relative to the
//! rest of a small cohort.

use ectctl::connectome::{qc_outliers, QcConfig, RawConnectome};
use ectctl::synth::generate_connectome;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cohort: Vec<RawConnectome> = (0..12)
        .map(|seed| generate_connectome(40, 0.1, 3, seed))
        .collect::<Result<_, _>>()?;
    cohort[4] = RawConnectome::from_matrix(cohort[4].weights() * 25.0)?;

    let report = qc_outliers(&cohort, &QcConfig::without_fa())?;
    for f in &report.fences {
        println!("{f:?}");
    }
    println!("flagged subjects: {:?}", report.flagged_indices());
    Ok(())
}
