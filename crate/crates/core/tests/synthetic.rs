use nalgebra::DVector;

use ectctl::connectome::prepare;
use ectctl::stats::{ancova, design_matrix, ks_uniform, ols_fit, Column, Direction};
use ectctl::synth::{generate_cohort, generate_connectome, CohortGenSpec, GraphModel, PredictorScale};

#[test]
fn erdos_renyi_density_is_unbiased() {
    let (n, p, draws) = (60usize, 0.1, 100u64);
    let pairs = (n * (n - 1) / 2) as f64;
    let mean: f64 = (0..draws)
        .map(|seed| {
            let raw = generate_connectome(n, p, 3, seed).unwrap();
            prepare(&raw, 3).unwrap().edge_count() as f64 / pairs
        })
        .sum::<f64>()
        / draws as f64;
    let sigma = (p * (1.0 - p) / (pairs * draws as f64)).sqrt();
    assert!((mean - p).abs() < 3.0 * sigma, "mean density {mean}, 3 sigma {}", 3.0 * sigma);
}

#[test]
fn planted_coefficients_are_recovered_with_low_noise() {
    let spec = CohortGenSpec {
        n_subjects: 500,
        n_nodes: 40,
        sigma_m: 0.01,
        sigma_y: 0.01,
        predictor_scale: PredictorScale::Raw,
        graph: GraphModel::ExpectedDegree { heterogeneity: (0.0, 1.0) },
        seed: 17,
        ..CohortGenSpec::default()
    };
    let cohort = generate_cohort(&spec).unwrap();
    assert_eq!(cohort.clamped_psi, 0);
    let r = &cohort.table.records;
    let ac: Vec<f64> = r.iter().map(|s| s.ac_mean).collect();
    let mc: Vec<f64> = r.iter().map(|s| s.mc_mean).collect();
    let psi: Vec<f64> = r.iter().map(|s| s.psi.unwrap()).collect();
    let resp: Vec<f64> = r.iter().map(|s| s.response).collect();

    let m_fit = ols_fit(&design_matrix(500, &[&ac]), &DVector::from_column_slice(&psi)).unwrap();
    let y_fit = ols_fit(&design_matrix(500, &[&psi, &mc]), &DVector::from_column_slice(&resp)).unwrap();
    let checks = [
        ("beta0", m_fit.coefficients[0], m_fit.std_errors[0], spec.beta0),
        ("beta1", m_fit.coefficients[1], m_fit.std_errors[1], spec.beta1),
        ("gamma1", y_fit.coefficients[1], y_fit.std_errors[1], spec.gamma1),
        ("gamma2", y_fit.coefficients[2], y_fit.std_errors[2], spec.gamma2),
    ];
    for (name, est, se, truth) in checks {
        assert!((est - truth).abs() < 5.0 * se, "{name}: {est} vs {truth} (se {se})");
    }
    assert!(m_fit.std_errors[1] < 0.01 * spec.beta1.abs());
    assert!(y_fit.std_errors[1] < 0.05 * spec.gamma1.abs());
}

#[test]
fn null_response_gives_uniform_p_values() {
    let p: Vec<f64> = (0..200u64)
        .map(|seed| {
            let spec = CohortGenSpec {
                n_subjects: 40,
                n_nodes: 20,
                gamma1: 0.0,
                gamma2: 0.0,
                seed,
                ..CohortGenSpec::default()
            };
            let cohort = generate_cohort(&spec).unwrap();
            ancova(
                &cohort.table,
                Column::Response,
                Column::Psi,
                &Column::default_covariates(),
                Direction::Negative,
            )
            .unwrap()
            .p_two_sided
        })
        .collect();
    let ks = ks_uniform(&p);
    assert!(ks < 0.1, "KS {ks}");
    let rejected = p.iter().filter(|&&v| v < 0.05).count();
    assert!(rejected <= 20, "{rejected}/200 rejected");
}

#[test]
fn orthogonalized_noise_recovers_paths_exactly() {
    let spec = CohortGenSpec {
        n_subjects: 60,
        n_nodes: 20,
        gamma2: 0.0,
        orthogonalize_noise: true,
        predictor_scale: PredictorScale::Raw,
        seed: 8,
        ..CohortGenSpec::default()
    };
    let cohort = generate_cohort(&spec).unwrap();
    let covs = Column::default_covariates();
    let psi = ancova(&cohort.table, Column::Psi, Column::AcMean, &covs, Direction::Positive).unwrap();
    assert!((psi.coefficient - spec.beta1).abs() < 1e-8 * spec.beta1.abs(), "{}", psi.coefficient);
}
