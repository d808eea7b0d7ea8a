//! Post-ictal suppression index on a hand-built power trace: a loud ictal
//! stretch followed by a quieter tail.

use ectctl::dynamics::{compute_psi, PsiConfig, SignalTrace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = PsiConfig::default();
    let end = 2000;
    for tail in [40.0, 10.0, 1.0] {
        let samples: Vec<f64> = (0..4000)
            .map(|k| if k < end { 100.0 } else { tail } + (k as f64 * 0.3).sin())
            .collect();
        let trace = SignalTrace::from_power(samples, cfg.sampling_rate).with_seizure_end(end);
        let r = compute_psi(&trace, &cfg)?;
        println!("tail power {tail:>5}: PSI {:.2}%", r.percent());
    }
    Ok(())
}
