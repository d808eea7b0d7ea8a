//! Simulates a stimulus train on a connectome and sweeps the system
//! towards instability.

use ectctl::connectome::prepare;
use ectctl::dynamics::{ect_experiment, stability_sweep, EctProtocol, PsiConfig};
use ectctl::synth::generate_connectome;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = prepare(&generate_connectome(50, 0.08, 3, 3)?, 3)?;
    let protocol = EctProtocol::default();
    let psi = PsiConfig::default();

    let o = ect_experiment(&m, 1.0, &protocol, &psi, 4096)?;
    println!(
        "output power {:.4}  peak {:.4}  seizure end {}  PSI {:.4}",
        o.output_power, o.peak_power, o.seizure_end_index, o.psi.psi
    );

    let fractions: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    println!("{:>6} {:>8} {:>9} {:>9} {:>12} {:>7}", "c", "rho", "MC", "AC", "power", "PSI");
    for p in stability_sweep(&m, &fractions, 1.0, &protocol, &psi, 4096)? {
        println!(
            "{:>6.4} {:>8.4} {:>9.5} {:>9.5} {:>12.4} {:>7.4}",
            p.c, p.spectral_radius, p.mc_mean, p.ac_mean, p.output_power, p.psi
        );
    }
    Ok(())
}
