mod common;

use common::*;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use wass_shrink::baselines::{
    linear_shrinkage, sample_moments, sample_moments_of_rows, stein_loss, Divisor,
    LinearShrinkageEstimator, PrecisionEstimator, SampleMoments, WassersteinEstimator,
};
use wass_shrink::cv::{
    cross_validate, held_out_stein_score, kfold_stein, select_best, CvScheme, FoldEvaluator,
    GridParam, ScoreDirection, SteinEvaluator, TuningGrid,
};
use wass_shrink::{Result, SymmetricMatrix};

fn gaussian_rows(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng(seed);
    DMatrix::from_fn(n, p, |_, j| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * (1.0 + j as f64)
    })
}

#[test]
fn stein_loss_against_direct_formula() {
    let mut rng = rng(1);
    for _ in 0..20 {
        let p = rng.random_range(1..8);
        let x = random_pd(p, &mut rng);
        let s = random_pd(p, &mut rng);
        let xs = x.as_matrix() * s.as_matrix();
        let direct = -xs.determinant().ln() + xs.trace() - p as f64;
        let loss = stein_loss(&x, &s).unwrap();
        assert!((loss - direct).abs() <= 1e-9 * direct.abs().max(1.0));
        assert!(loss >= 0.0);
    }
}

#[test]
fn stein_loss_vanishes_only_at_the_inverse() {
    let mut rng = rng(2);
    let s = random_pd(5, &mut rng);
    let inv = s.inverse_pd().unwrap();
    assert!(stein_loss(&inv, &s).unwrap() < 1e-12);
    assert!(stein_loss(&inv.scale(1.1), &s).unwrap() > 1e-3);
}

#[test]
fn stein_loss_is_rotation_invariant() {
    let mut rng = rng(3);
    for _ in 0..10 {
        let p = rng.random_range(2..7);
        let x = random_pd(p, &mut rng);
        let s = random_pd(p, &mut rng);
        let r = random_rotation(p, &mut rng);
        let a = stein_loss(&x, &s).unwrap();
        let b = stein_loss(&conjugate(&r, &x), &conjugate(&r, &s)).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }
}

#[test]
fn linear_shrinkage_endpoints() {
    let data = gaussian_rows(30, 4, 4);
    let m = sample_moments(&data, 29.0).unwrap();
    let full = linear_shrinkage(&m, 0.0).unwrap();
    assert!(max_abs_diff(&full, &m.covariance.inverse_pd().unwrap()) < 1e-10);
    let diag = linear_shrinkage(&m, 1.0).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let expected = if i == j {
                1.0 / m.covariance[(i, i)]
            } else {
                0.0
            };
            assert!((diag[(i, j)] - expected).abs() < 1e-12);
        }
    }
    assert!(linear_shrinkage(&m, 1.5).is_err());
}

#[test]
fn sample_covariance_divisors() {
    let data = gaussian_rows(12, 3, 5);
    let a = sample_moments_of_rows(&data, &(0..12).collect::<Vec<_>>(), Divisor::N).unwrap();
    let b =
        sample_moments_of_rows(&data, &(0..12).collect::<Vec<_>>(), Divisor::NMinusOne).unwrap();
    assert!(max_abs_diff(&a.covariance.scale(12.0 / 11.0), &b.covariance) < 1e-12);
    assert!(sample_moments(&data, 0.5).is_err());
}

#[test]
fn estimators_match_library_routines() {
    let data = gaussian_rows(25, 4, 6);
    let m = sample_moments(&data, 25.0).unwrap();
    let w = WassersteinEstimator::default().estimate(&m, 0.4).unwrap();
    let direct = wass_shrink::shrinkage::wasserstein_shrinkage(&m.covariance, 0.4, 1e-12)
        .unwrap()
        .precision;
    assert_eq!(w, direct);
    let l = LinearShrinkageEstimator.estimate(&m, 0.3).unwrap();
    assert_eq!(l, linear_shrinkage(&m, 0.3).unwrap());
}

#[test]
fn cross_validation_argmin_recomputed_by_hand() {
    let data = gaussian_rows(24, 3, 7);
    let grid = TuningGrid::log_spaced(GridParam::Rho, -2.0, 1.0, 7).unwrap();
    let estimator = WassersteinEstimator::default();
    let evaluator = SteinEvaluator {
        data: &data,
        estimator: &estimator,
        divisor: Divisor::N,
    };
    let scheme = CvScheme::KFold(4);
    let report = cross_validate(24, &grid, scheme, 11, &evaluator).unwrap();
    assert!(report.failures.is_empty());

    let folds = scheme.folds(24, 11).unwrap();
    let mut means = Vec::new();
    for &rho in grid.values() {
        let mut total = 0.0;
        for fold in &folds {
            let train: Vec<usize> = (0..24).filter(|i| !fold.contains(i)).collect();
            let m = sample_moments_of_rows(&data, &train, Divisor::N).unwrap();
            let x = estimator.estimate(&m, rho).unwrap();
            let mut second = DMatrix::zeros(3, 3);
            for &r in fold {
                let d = data.row(r).transpose() - &m.mean;
                second += &d * d.transpose();
            }
            let second = SymmetricMatrix::symmetrize(&(second / fold.len() as f64)).unwrap();
            total += held_out_stein_score(&x, &second).unwrap();
        }
        means.push(total / folds.len() as f64);
    }
    for (a, b) in means.iter().zip(&report.mean_scores) {
        assert!((a - b).abs() < 1e-10);
    }
    let best = (0..means.len())
        .min_by(|&a, &b| means[a].total_cmp(&means[b]))
        .unwrap();
    assert_eq!(report.selected_index, best);
    assert_eq!(report.selected_value, grid.values()[best]);
}

#[test]
fn cross_validation_is_deterministic() {
    let data = gaussian_rows(15, 2, 8);
    let grid = TuningGrid::log_spaced(GridParam::Rho, -1.0, 0.0, 3).unwrap();
    let estimator = WassersteinEstimator::default();
    let evaluator = SteinEvaluator {
        data: &data,
        estimator: &estimator,
        divisor: Divisor::N,
    };
    let a = cross_validate(15, &grid, CvScheme::KFold(3), 5, &evaluator).unwrap();
    let b = cross_validate(15, &grid, CvScheme::KFold(3), 5, &evaluator).unwrap();
    assert_eq!(a.fold_scores, b.fold_scores);
    let loo = cross_validate(15, &grid, CvScheme::LeaveOneOut, 0, &evaluator).unwrap();
    assert_eq!(loo.fold_scores[0].len(), 15);
}

struct Failing;

impl FoldEvaluator for Failing {
    fn direction(&self) -> ScoreDirection {
        ScoreDirection::Maximize
    }

    fn evaluate(&self, _: &[usize], validation: &[usize], param: f64) -> Result<f64> {
        if param > 1.0 && validation.contains(&0) {
            Err(wass_shrink::Error::Singular("stub"))
        } else {
            Ok(param)
        }
    }
}

#[test]
fn failures_get_the_worst_score() {
    let grid = TuningGrid::new(GridParam::Alpha, vec![0.5, 2.0]).unwrap();
    let report = cross_validate(6, &grid, CvScheme::KFold(3), 0, &Failing).unwrap();
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.mean_scores[1], f64::NEG_INFINITY);
    assert_eq!(report.selected_index, 0);
    assert_eq!(select_best(&[1.0, 1.0, 0.5], ScoreDirection::Minimize), 2);
    assert_eq!(select_best(&[1.0, 1.0], ScoreDirection::Minimize), 0);
}

#[test]
fn kfold_stein_matches_a_loop() {
    let data = gaussian_rows(20, 3, 9);
    let folds = CvScheme::KFold(4).folds(20, 3).unwrap();
    let estimator = |m: &SampleMoments, a: f64| linear_shrinkage(m, a);
    let losses = kfold_stein(&data, &folds, &estimator, 0.2, Divisor::NMinusOne).unwrap();
    for (fold, loss) in folds.iter().zip(&losses) {
        let rest: Vec<usize> = (0..20).filter(|i| !fold.contains(i)).collect();
        let train = sample_moments_of_rows(&data, fold, Divisor::NMinusOne).unwrap();
        let reference = sample_moments_of_rows(&data, &rest, Divisor::NMinusOne).unwrap();
        let expected = stein_loss(
            &linear_shrinkage(&train, 0.2).unwrap(),
            &reference.covariance,
        )
        .unwrap();
        assert_eq!(*loss, expected);
    }
}

#[test]
fn kfold_partitions_every_index_once() {
    for (n, k) in [(10, 3), (7, 7), (100, 6)] {
        let folds = CvScheme::KFold(k).folds(n, 42).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
    assert!(CvScheme::KFold(5).folds(4, 0).is_err());
    assert!(CvScheme::parse("kfold:1").is_err());
    assert_eq!(CvScheme::parse("kfold:5").unwrap(), CvScheme::KFold(5));
}
