use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ectctl::mlbench::{
    default_space, run_benchmark, run_fold, run_pipeline, EstimatorGrid, FeatureSet, PipelineSpec, Target,
    TransformGrid,
};
use ectctl::stats::loocv_linear;

fn noise(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

#[test]
fn held_out_label_never_reaches_training() {
    let (n, d) = (14, 5);
    let x = noise(n, d, 1);
    let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] + (i as f64 * 0.7).sin()).collect();
    for spec in default_space(9) {
        for held in [0, 5, n - 1] {
            let base = run_fold(&spec, &x, &y, held).unwrap();
            let mut y2 = y.clone();
            y2[held] = -1e9;
            let moved = run_fold(&spec, &x, &y2, held).unwrap();
            assert_eq!(base, moved, "{} fold {held}", spec.name);
        }
    }
}

#[test]
fn identity_least_squares_on_one_feature_is_simple_loocv() {
    let x = noise(25, 1, 2);
    let y: Vec<f64> = (0..25).map(|i| 3.0 * x[(i, 0)] + (i as f64).cos()).collect();
    let spec = PipelineSpec::new("ls", TransformGrid::Identity, EstimatorGrid::LeastSquares);
    let mut spec = spec;
    spec.preprocessing = ectctl::mlbench::Preprocessing::identity();
    let a = run_pipeline(&spec, &x, &y).unwrap();
    let b = loocv_linear(x.column(0).as_slice(), &y).unwrap();
    assert_eq!(a.predictions, b.predictions);
    assert_eq!(a.variance_explained, b.variance_explained);
}

#[test]
fn benchmark_rejects_misaligned_subjects() {
    let x = noise(6, 2, 3);
    let ids: Vec<String> = (0..6).map(|i| format!("s{i}")).collect();
    let mut swapped = ids.clone();
    swapped.swap(1, 2);
    let err = run_benchmark(
        &default_space(0)[..1],
        &[FeatureSet {
            name: "m".into(),
            subject_ids: swapped,
            matrix: x,
        }],
        &Target {
            subject_ids: ids,
            values: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5],
        },
        &[],
    );
    assert!(err.is_err());
}

/// On pure-noise features the true target should rank like any
/// permutation of it.
#[test]
fn noise_features_score_like_permuted_targets() {
    let (n, d, perms, seeds) = (16, 20, 19, 20);
    let spec = PipelineSpec::new(
        "ridge",
        TransformGrid::Identity,
        EstimatorGrid::Ridge { alphas: vec![1.0] },
    );
    let mut top = 0;
    let mut ranks = Vec::new();
    for seed in 0..seeds {
        let x = noise(n, d, 100 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let truth = run_pipeline(&spec, &x, &y).unwrap().variance_explained;
        let mut above = 0;
        for _ in 0..perms {
            let mut yp = y.clone();
            yp.shuffle(&mut rng);
            if run_pipeline(&spec, &x, &yp).unwrap().variance_explained >= truth {
                above += 1;
            }
        }
        if above == 0 {
            top += 1;
        }
        ranks.push(above);
    }
    // expected 1 of 20 in the top slot; 5 or more has probability < 0.3%
    assert!(top < 5, "true target ranked first in {top}/{seeds} seeds: {ranks:?}");
    let mean_rank = ranks.iter().sum::<usize>() as f64 / seeds as f64;
    assert!((4.0..=15.0).contains(&mean_rank), "mean rank {mean_rank}");
}
