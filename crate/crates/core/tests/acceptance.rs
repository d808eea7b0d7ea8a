//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use ectctl::connectome::{prepare, qc_outliers, stabilize, ConnectomeMatrix, QcConfig, RawConnectome};
use ectctl::control::{
    average_controllability_nodal, gramian_trace, modal_controllability_nodal, spectral_decompose,
    whole_brain_ac, whole_brain_mc, Horizon,
};
use ectctl::dynamics::{compute_psi, impulse_output_power, stability_sweep, EctProtocol, PsiConfig, SignalTrace};
use ectctl::mlbench::{
    default_space, run_benchmark, run_fold, EstimatorGrid, FeatureSet, PipelineSpec, Target, TransformGrid,
};
use ectctl::stats::{
    ancova_arrays, f_from_partial_eta_sq, mediate_arrays, spearman, Direction, MediationConfig,
};
use ectctl::synth::{generate_cohort, generate_connectome, CohortGenSpec};

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normals(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

/// Symmetric nonnegative weights with zero diagonal, stabilized.
fn random_stable(n: usize, r: &mut ChaCha8Rng) -> ConnectomeMatrix {
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if n == 2 || r.random::<f64>() < 0.3 {
                let w = r.random::<f64>();
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
    }
    stabilize(&ConnectomeMatrix::from_adjacency(a).expect("valid adjacency"))
}

fn ks_uniform(ps: &[f64]) -> f64 {
    let mut v = ps.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &p)| ((i + 1) as f64 / n - p).max(p - i as f64 / n))
        .fold(0.0, f64::max)
}

fn closed_form_equivalence() -> Outcome {
    let mut r = rng(101);
    let mut worst_mc = 0.0f64;
    let mut worst_ac = 0.0f64;
    for k in 0..50 {
        let n = [2, 10, 114][k % 3];
        let m = random_stable(n, &mut r);
        let d = spectral_decompose(&m).map_err(|e| e.to_string())?;
        let mc = modal_controllability_nodal(&d).map_err(|e| e.to_string())?;
        let ac = average_controllability_nodal(&d).map_err(|e| e.to_string())?;
        worst_mc = worst_mc.max((whole_brain_mc(&d).unwrap() - mc.mean()).abs());
        worst_ac = worst_ac.max((whole_brain_ac(&d).unwrap() - ac.mean()).abs());
    }
    let msg = format!("max |MC diff| {worst_mc:.2e}, max |AC diff| {worst_ac:.2e}");
    if worst_mc < 1e-10 && worst_ac < 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// `Σ_j v_ij² / (1 − ξ_j²)` is the diagonal of `(I − A²)⁻¹` for symmetric `A`.
fn gramian_oracle() -> Outcome {
    let mut r = rng(202);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = random_stable(114, &mut r);
        let a = m.adjacency();
        let resolvent = (DMatrix::<f64>::identity(114, 114) - a * a)
            .lu()
            .try_inverse()
            .ok_or("I - A^2 is singular")?;
        for i in 0..114 {
            let g = gramian_trace(&m, &[i], Horizon::default()).map_err(|e| e.to_string())?;
            worst = worst.max((g - resolvent[(i, i)]).abs());
        }
    }
    let msg = format!("max |trace W - oracle| {worst:.2e} over 20 x 114 nodes");
    if worst < 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn eigendecomposition() -> Outcome {
    let mut r = rng(303);
    let mut worst_res = 0.0f64;
    let mut worst_orth = 0.0f64;
    let mut count = 0;
    for k in 0..90 {
        let n = [2, 10, 114][k % 3];
        let m = random_stable(n, &mut r);
        let d = spectral_decompose(&m).map_err(|e| e.to_string())?;
        worst_res = worst_res.max(d.reconstruction_residual(m.adjacency()) / m.adjacency().norm());
        worst_orth = worst_orth.max(d.orthonormality_defect());
        count += 1;
    }
    for seed in 0..10 {
        let raw = generate_connectome(114, 0.1, 3, seed).map_err(|e| e.to_string())?;
        let m = prepare(&raw, 3).map_err(|e| e.to_string())?;
        let d = spectral_decompose(&m).map_err(|e| e.to_string())?;
        worst_res = worst_res.max(d.reconstruction_residual(m.adjacency()) / m.adjacency().norm());
        worst_orth = worst_orth.max(d.orthonormality_defect());
        count += 1;
    }
    let msg = format!("{count} matrices, relative residual {worst_res:.2e}, orthonormality {worst_orth:.2e}");
    if worst_res < 1e-8 && worst_orth < 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn power_gramian_identity() -> Outcome {
    let mut r = rng(404);
    let mut worst = 0.0f64;
    for k in 0..10 {
        let n = [10, 114][k % 2];
        let m = random_stable(n, &mut r);
        let d = spectral_decompose(&m).map_err(|e| e.to_string())?;
        let ac = average_controllability_nodal(&d).map_err(|e| e.to_string())?;
        for node in 0..n {
            let p = impulse_output_power(&m, node, 1e-15, 1_000_000).map_err(|e| e.to_string())?;
            worst = worst.max((p - ac[node]).abs());
        }
    }
    let msg = format!("max |impulse power - AC_i| {worst:.2e}");
    if worst < 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn monotonicity() -> Outcome {
    let raw = generate_connectome(114, 0.1, 3, 5).map_err(|e| e.to_string())?;
    let base = prepare(&raw, 3).map_err(|e| e.to_string())?;
    let fractions: Vec<f64> = (0..10).map(|i| 0.1 + 0.8 * i as f64 / 9.0).collect();
    let sweep = stability_sweep(
        &base,
        &fractions,
        1.0,
        &EctProtocol::default(),
        &PsiConfig::default(),
        4096,
    )
    .map_err(|e| e.to_string())?;
    let col = |f: fn(&ectctl::dynamics::SweepPoint) -> f64| sweep.iter().map(f).collect::<Vec<_>>();
    let (c, ac, mc, power, psi) = (
        col(|p| p.c),
        col(|p| p.ac_mean),
        col(|p| p.mc_mean),
        col(|p| p.output_power),
        col(|p| p.psi),
    );
    let s = |a: &[f64], b: &[f64]| spearman(a, b).unwrap_or(f64::NAN);
    let (r_ac, r_mc, r_pow, r_ac_psi, r_mc_psi) = (s(&c, &ac), s(&c, &mc), s(&c, &power), s(&ac, &psi), s(&mc, &psi));
    let msg = format!(
        "rho(c,AC) {r_ac:+.3}, rho(c,MC) {r_mc:+.3}, rho(c,power) {r_pow:+.3}, rho(AC,PSI) {r_ac_psi:+.3}, rho(MC,PSI) {r_mc_psi:+.3}"
    );
    if r_ac == 1.0 && r_mc == -1.0 && r_pow == 1.0 && r_ac_psi > 0.0 && r_mc_psi < 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn psi_protocol() -> Outcome {
    let cfg = PsiConfig::default();
    let w = cfg.window_samples().map_err(|e| e.to_string())?;
    let g = cfg.guard_samples().map_err(|e| e.to_string())?;
    let end = 2000;
    let trace = |samples: Vec<f64>| SignalTrace::from_power(samples, 200.0).with_seizure_end(end);

    let zero = compute_psi(&trace((0..4000).map(|k| if k < end { 5.0 } else { 0.0 }).collect()), &cfg)
        .map_err(|e| e.to_string())?;
    let equal = compute_psi(&trace(vec![3.0; 4000]), &cfg).map_err(|e| e.to_string())?;

    let mut r = rng(606);
    let mut worst = 0.0f64;
    let mut windows_ok = true;
    for _ in 0..50 {
        let samples: Vec<f64> = (0..4000).map(|_| r.random::<f64>() * 10.0).collect();
        let res = compute_psi(&trace(samples.clone()), &cfg).map_err(|e| e.to_string())?;
        let sum = |a: usize, b: usize| samples[a..b].iter().sum::<f64>();
        let s_start = end - 384 - 3 * 256;
        let t_start = end + 384;
        let oracle = 1.0 - sum(t_start, t_start + 768) / sum(s_start, s_start + 768);
        worst = worst.max((res.raw_psi - oracle).abs());
        let expect_s: Vec<(usize, usize)> = (0..3).map(|i| (s_start + 256 * i, s_start + 256 * (i + 1))).collect();
        let expect_t: Vec<(usize, usize)> = (0..3).map(|i| (t_start + 256 * i, t_start + 256 * (i + 1))).collect();
        windows_ok &= res.seizure_windows == expect_s && res.termination_windows == expect_t;
    }
    let msg = format!(
        "window {w}, guard {g}, zero-termination PSI {}, equal-power PSI {}, oracle diff {worst:.2e}",
        zero.psi, equal.psi
    );
    if w == 256 && g == 768 && zero.psi == 1.0 && equal.psi == 0.0 && worst < 1e-12 && windows_ok {
        Ok(msg)
    } else {
        Err(format!("{msg}, windows match: {windows_ok}"))
    }
}

fn ancova_identity() -> Outcome {
    let cases = [(0.157, 7.28), (0.077, 3.28)];
    let mut parts = Vec::new();
    let mut ok = true;
    for (eta, expected) in cases {
        let f = f_from_partial_eta_sq(eta, 39);
        ok &= (f - expected).abs() <= 0.05;
        parts.push(format!("eta {eta} -> F {f:.3} (expected {expected})"));
    }
    let msg = parts.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// RSS of the least-squares fit via the normal equations.
fn normal_equations_rss(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let xtx = x.transpose() * x;
    let beta = xtx.cholesky().expect("full rank").solve(&(x.transpose() * y));
    (y - x * beta).norm_squared()
}

fn ancova_oracle() -> Outcome {
    let mut r = rng(808);
    let n = 45;
    let mut worst_f = 0.0f64;
    let mut worst_p = 0.0f64;
    for k in 0..100 {
        let covs: Vec<Vec<f64>> = (0..4).map(|_| normals(&mut r, n)).collect();
        let x = normals(&mut r, n);
        let e = normals(&mut r, n);
        let effect = 0.1 * (k % 5) as f64;
        let y: Vec<f64> = (0..n)
            .map(|i| 1.0 + effect * x[i] + 0.5 * covs[0][i] - 0.3 * covs[2][i] + e[i])
            .collect();
        let res = ancova_arrays(&y, &x, &covs, Direction::Positive).map_err(|e| e.to_string())?;
        let full = DMatrix::from_fn(n, 6, |i, j| match j {
            0 => 1.0,
            1 => x[i],
            _ => covs[j - 2][i],
        });
        let reduced = DMatrix::from_fn(n, 5, |i, j| if j == 0 { 1.0 } else { covs[j - 1][i] });
        let yv = DVector::from_column_slice(&y);
        let rss_f = normal_equations_rss(&full, &yv);
        let rss_r = normal_equations_rss(&reduced, &yv);
        let df2 = (n - 6) as f64;
        let f = (rss_r - rss_f) / (rss_f / df2);
        let p = FisherSnedecor::new(1.0, df2).unwrap().sf(f);
        worst_f = worst_f.max((res.f_value - f).abs());
        worst_p = worst_p.max((res.p_two_sided - p).abs());
    }
    let mut null_p = Vec::new();
    for _ in 0..500 {
        let covs: Vec<Vec<f64>> = (0..4).map(|_| normals(&mut r, n)).collect();
        let x = normals(&mut r, n);
        let y: Vec<f64> = normals(&mut r, n).iter().zip(&covs[1]).map(|(e, c)| e + c).collect();
        null_p.push(
            ancova_arrays(&y, &x, &covs, Direction::Positive)
                .map_err(|e| e.to_string())?
                .p_two_sided,
        );
    }
    let ks = ks_uniform(&null_p);
    let msg = format!("max |F diff| {worst_f:.2e}, max |p diff| {worst_p:.2e}, null KS {ks:.3}");
    if worst_f < 1e-6 && worst_p < 1e-6 && ks < 0.1 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Residual of `v` after projecting out the columns of `basis`.
fn residualize(v: &[f64], basis: &[&[f64]]) -> Vec<f64> {
    let n = v.len();
    let x = DMatrix::from_fn(n, basis.len() + 1, |i, j| if j == 0 { 1.0 } else { basis[j - 1][i] });
    let y = DVector::from_column_slice(v);
    let beta = (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * &y));
    (y - x * beta).as_slice().to_vec()
}

fn mediation_calibration() -> Outcome {
    let planted_cfg = |seed| MediationConfig {
        n_boot: 2000,
        n_perm: 2000,
        seed,
        alpha: 0.05,
    };
    let mut detected = 0;
    for seed in 0..100u64 {
        let mut r = rng(9000 + seed);
        let n = 200;
        let cov = normals(&mut r, n);
        let x = normals(&mut r, n);
        let (em, ey) = (normals(&mut r, n), normals(&mut r, n));
        let m: Vec<f64> = (0..n).map(|i| 0.4 * x[i] + 0.2 * cov[i] + em[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| 0.4 * m[i] - 0.2 * cov[i] + ey[i]).collect();
        let res = mediate_arrays(&x, &m, &y, &[cov], &planted_cfg(seed)).map_err(|e| e.to_string())?;
        if (res.ci_low > 0.0 || res.ci_high < 0.0) && res.p_perm < 0.05 {
            detected += 1;
        }
    }

    let null_cfg = |seed| MediationConfig {
        n_boot: 50,
        n_perm: 999,
        seed,
        alpha: 0.05,
    };
    let mut null_p = Vec::new();
    for seed in 0..400u64 {
        let mut r = rng(20_000 + seed);
        let n = 100;
        let (x, m, y) = (normals(&mut r, n), normals(&mut r, n), normals(&mut r, n));
        null_p.push(
            mediate_arrays(&x, &m, &y, &[], &null_cfg(seed))
                .map_err(|e| e.to_string())?
                .p_perm,
        );
    }
    let ks = ks_uniform(&null_p);

    let mut r = rng(31);
    let n = 60;
    let x = normals(&mut r, n);
    let em = residualize(&normals(&mut r, n), &[&x]);
    let m: Vec<f64> = (0..n).map(|i| 2.0 * x[i] + em[i]).collect();
    let ey = residualize(&normals(&mut r, n), &[&x, &m]);
    let y: Vec<f64> = (0..n).map(|i| 3.0 * m[i] + ey[i]).collect();
    let exact = mediate_arrays(&x, &m, &y, &[], &planted_cfg(1)).map_err(|e| e.to_string())?;
    let ab_err = (exact.ab - 6.0).abs();

    let again = mediate_arrays(&x, &m, &y, &[], &planted_cfg(1)).map_err(|e| e.to_string())?;
    let deterministic = again.ci_low.to_bits() == exact.ci_low.to_bits()
        && again.ci_high.to_bits() == exact.ci_high.to_bits()
        && again.p_perm == exact.p_perm;

    let msg = format!(
        "planted detected {detected}/100, null KS {ks:.3}, |ab - 6| {ab_err:.2e}, deterministic {deterministic}"
    );
    if detected >= 95 && ks < 0.1 && ab_err < 1e-9 && deterministic {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn benchmark_space(seed: u64) -> Vec<PipelineSpec> {
    let transforms = [
        TransformGrid::Identity,
        TransformGrid::Pca { components: vec![5, 10] },
        TransformGrid::SelectPercentile {
            percentiles: vec![5.0, 10.0],
        },
    ];
    let estimators = [
        EstimatorGrid::LeastSquares,
        EstimatorGrid::Ridge {
            alphas: vec![0.1, 1.0, 10.0, 100.0],
        },
        EstimatorGrid::BaggedTrees {
            n_trees: 10,
            max_depth: vec![3],
            min_samples_leaf: 2,
        },
    ];
    let mut specs = Vec::new();
    for t in &transforms {
        for e in &estimators {
            let mut spec = PipelineSpec::new(format!("{}+{}", t.label(), e.label()), t.clone(), e.clone());
            spec.seed = seed;
            specs.push(spec);
        }
    }
    specs
}

fn benchmark_structure() -> Outcome {
    let (n, d) = (24, 40);
    let mut wins = 0;
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let spec = CohortGenSpec {
            n_subjects: n,
            n_nodes: 20,
            gamma1: 0.0,
            seed,
            ..CohortGenSpec::default()
        };
        let cohort = generate_cohort(&spec).map_err(|e| e.to_string())?;
        let ids: Vec<String> = cohort.table.records.iter().map(|r| r.subject_id.clone()).collect();
        let response: Vec<f64> = cohort.table.records.iter().map(|r| r.response).collect();
        let mc: Vec<f64> = cohort.table.records.iter().map(|r| r.mc_mean).collect();
        let mut r = rng(50_000 + seed);
        let noise = DMatrix::from_fn(n, d, |_, _| r.sample::<f64, _>(StandardNormal));
        let table = run_benchmark(
            &benchmark_space(seed),
            &[FeatureSet {
                name: "noise".into(),
                subject_ids: ids.clone(),
                matrix: noise,
            }],
            &Target {
                subject_ids: ids,
                values: response,
            },
            &[("mc_mean".into(), mc)],
        )
        .map_err(|e| e.to_string())?;
        let single = table.single_feature[0].variance_explained;
        let median = table.median_multivariate().unwrap();
        if single >= median {
            wins += 1;
        } else {
            failures.push(seed);
        }
    }
    let msg = format!("single-feature MC >= multivariate median in {wins}/100 seeds (losses at {failures:?})");
    if wins >= 90 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn no_leakage() -> Outcome {
    let mut r = rng(1111);
    let (n, d) = (16, 6);
    let x = DMatrix::from_fn(n, d, |_, _| r.sample::<f64, _>(StandardNormal));
    let y = normals(&mut r, n);
    let mut checked = 0;
    for spec in default_space(3) {
        for held in 0..n {
            let base = run_fold(&spec, &x, &y, held).map_err(|e| e.to_string())?;
            for replacement in [y[(held + 1) % n], y[(held + 7) % n], 1e6] {
                let mut y2 = y.clone();
                y2[held] = replacement;
                let other = run_fold(&spec, &x, &y2, held).map_err(|e| e.to_string())?;
                let same = base.prediction.to_bits() == other.prediction.to_bits()
                    && base.training_predictions.len() == other.training_predictions.len()
                    && base
                        .training_predictions
                        .iter()
                        .zip(&other.training_predictions)
                        .all(|(a, b)| a.to_bits() == b.to_bits());
                if !same {
                    return Err(format!("{} fold {held} changed with held-out label", spec.name));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} relabelled folds over 9 pipelines, all bit-identical"))
}

fn qc_rule() -> Outcome {
    let n = 8;
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + 3) % n)]).collect();
    let planted = 6;
    let cohort: Vec<RawConnectome> = (0..10)
        .map(|k| {
            let mut w = DMatrix::<f64>::zeros(n, n);
            let mut fa = DMatrix::<f64>::zeros(n, n);
            for (e, &(i, j)) in edges.iter().enumerate() {
                if e == k {
                    continue;
                }
                let mut s = (10 + 3 * e) as f64 * (1.0 + 0.02 * k as f64);
                if k == planted {
                    s *= 20.0;
                }
                w[(i, j)] = s;
                w[(j, i)] = s;
                fa[(i, j)] = 0.4 + 0.005 * k as f64;
                fa[(j, i)] = fa[(i, j)];
            }
            RawConnectome::from_matrix(w).and_then(|r| r.with_fa(fa))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let report = qc_outliers(&cohort, &QcConfig::default()).map_err(|e| e.to_string())?;
    let flagged = report.flagged_indices();
    let msg = format!("flagged {flagged:?}, planted {planted}");
    if flagged == vec![planted] {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("closed-form whole-brain equivalence", closed_form_equivalence),
        ("Gramian trace oracle", gramian_oracle),
        ("eigendecomposition accuracy", eigendecomposition),
        ("impulse power equals average controllability", power_gramian_identity),
        ("stability sweep monotonicity", monotonicity),
        ("PSI protocol", psi_protocol),
        ("F from partial eta squared", ancova_identity),
        ("ANCOVA oracle and null calibration", ancova_oracle),
        ("mediation calibration", mediation_calibration),
        ("benchmark structure", benchmark_structure),
        ("no leakage", no_leakage),
        ("QC fence rule", qc_rule),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
