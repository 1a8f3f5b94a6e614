use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::synthetic::{
    precision_from_signs, sample_gaussian, sigma0_from_signs, sign_matrix, stream_rng,
    SyntheticSpec, PATTERN_STREAM,
};
use crate::baselines::{
    sample_moments, stein_loss, LinearShrinkageEstimator, PrecisionEstimator, SampleMoments,
    WassersteinEstimator,
};
use crate::cv::TuningGrid;
use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;
use crate::sqa::{SolverConfig, SparsityPattern};

/// Relative threshold below which an entry of the true precision counts as zero.
pub const ZERO_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Wasserstein,
    LinearShrinkage,
    /// Wasserstein shrinkage with a `known_fraction` of the true zero pairs imposed.
    SparseWasserstein {
        known_fraction: f64,
        solver: SolverConfig,
    },
}

impl Estimator {
    pub fn name(&self) -> String {
        match self {
            Estimator::Wasserstein => "wasserstein".into(),
            Estimator::LinearShrinkage => "linear".into(),
            Estimator::SparseWasserstein { known_fraction, .. } => {
                format!("wasserstein_sparse_{}", (known_fraction * 100.0).round())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Arm {
    pub estimator: Estimator,
    pub grid: TuningGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossRecord {
    pub trial: usize,
    pub estimator: String,
    pub param: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossSummary {
    pub estimator: String,
    pub param: f64,
    pub mean: f64,
    pub q20: f64,
    pub q80: f64,
}

/// Long-format loss table, ordered by trial, then arm, then grid value.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    pub records: Vec<LossRecord>,
    pub trials: usize,
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BenchmarkTable {
    /// Losses across trials for one estimator and grid value.
    pub fn losses(&self, estimator: &str, param: f64) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.estimator == estimator && r.param == param)
            .map(|r| r.loss)
            .collect()
    }

    /// Mean and 20%/80% quantiles per estimator and grid value.
    pub fn summary(&self) -> Vec<LossSummary> {
        let mut keys: Vec<(String, f64)> = Vec::new();
        for r in &self.records {
            if !keys.iter().any(|(e, p)| *e == r.estimator && *p == r.param) {
                keys.push((r.estimator.clone(), r.param));
            }
        }
        keys.into_iter()
            .map(|(estimator, param)| {
                let l = self.losses(&estimator, param);
                LossSummary {
                    mean: l.iter().sum::<f64>() / l.len() as f64,
                    q20: quantile(&l, 0.2),
                    q80: quantile(&l, 0.8),
                    estimator,
                    param,
                }
            })
            .collect()
    }

    /// Smallest loss over the grid in each trial.
    pub fn best_per_trial(&self, estimator: &str) -> Vec<f64> {
        let mut best = vec![f64::INFINITY; self.trials];
        for r in self.records.iter().filter(|r| r.estimator == estimator) {
            best[r.trial] = best[r.trial].min(r.loss);
        }
        best
    }
}

/// Off-diagonal pairs `i < j` with `|Pᵢⱼ| ≤ 10⁻⁸·max|P|`.
pub fn true_zero_pairs(precision: &SymmetricMatrix) -> Vec<(usize, usize)> {
    SparsityPattern::from_zeros_of(precision, ZERO_THRESHOLD * precision.max_abs())
        .pairs()
        .collect()
}

/// A random subset of `round(fraction·|zeros|)` true zero pairs, drawn from `seed`.
pub fn known_zero_pattern(
    precision: &SymmetricMatrix,
    fraction: f64,
    seed: u64,
) -> Result<SparsityPattern> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParameter {
            name: "known_fraction",
            value: fraction,
            reason: "must lie in [0, 1]",
        });
    }
    let mut pairs = true_zero_pairs(precision);
    let keep = (fraction * pairs.len() as f64).round() as usize;
    pairs.shuffle(&mut stream_rng(seed, PATTERN_STREAM));
    pairs.truncate(keep);
    SparsityPattern::new(precision.dim(), pairs)
}

pub fn trial_seed(spec: &SyntheticSpec, trial: usize) -> u64 {
    spec.seed.wrapping_add(trial as u64)
}

/// Moments (divisor `n`) of the sample drawn in `trial`.
pub fn trial_moments(
    spec: &SyntheticSpec,
    sigma0: &SymmetricMatrix,
    trial: usize,
) -> Result<SampleMoments> {
    let data = sample_gaussian(sigma0, spec.samples, trial_seed(spec, trial))?;
    sample_moments(&data, spec.samples as f64)
}

/// Stein losses of every arm and grid value over `spec.trials` independent samples of size
/// `spec.samples` from `N(0, Σ₀)`. Trial `t` draws from seed `spec.seed + t`; the sample
/// covariance uses divisor `n`.
pub fn synthetic_benchmark(spec: &SyntheticSpec, arms: &[Arm]) -> Result<BenchmarkTable> {
    spec.validate()?;
    let c = sign_matrix(spec);
    run_benchmark(
        spec,
        &sigma0_from_signs(&c, spec.ridge),
        &precision_from_signs(&c, spec.ridge),
        arms,
    )
}

/// `synthetic_benchmark` with an explicit ground truth.
pub fn run_benchmark(
    spec: &SyntheticSpec,
    sigma0: &SymmetricMatrix,
    precision: &SymmetricMatrix,
    arms: &[Arm],
) -> Result<BenchmarkTable> {
    let per_trial: Vec<Vec<LossRecord>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(spec, trial);
            let moments = trial_moments(spec, sigma0, trial)?;
            let mut out = Vec::new();
            for arm in arms {
                let name = arm.estimator.name();
                let estimator: Box<dyn PrecisionEstimator> = match &arm.estimator {
                    Estimator::Wasserstein => Box::new(WassersteinEstimator::default()),
                    Estimator::LinearShrinkage => Box::new(LinearShrinkageEstimator),
                    Estimator::SparseWasserstein {
                        known_fraction,
                        solver,
                    } => Box::new(WassersteinEstimator {
                        pattern: Some(known_zero_pattern(precision, *known_fraction, seed)?),
                        solver: solver.clone(),
                    }),
                };
                for &param in arm.grid.values() {
                    let x = estimator.estimate(&moments, param)?;
                    out.push(LossRecord {
                        trial,
                        estimator: name.clone(),
                        param,
                        loss: stein_loss(&x, sigma0)?,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(BenchmarkTable {
        records: per_trial.into_iter().flatten().collect(),
        trials: spec.trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cv::GridParam;

    #[test]
    fn quantile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert!((quantile(&v, 0.2) - 1.8).abs() < 1e-15);
        assert!((quantile(&v, 0.8) - 4.2).abs() < 1e-15);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn known_zero_subsets() {
        let p = SymmetricMatrix::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.5], &[0.0, 0.5, 1.0]])
            .unwrap();
        assert_eq!(true_zero_pairs(&p), vec![(0, 1), (0, 2)]);
        assert_eq!(known_zero_pattern(&p, 1.0, 0).unwrap().len(), 2);
        assert_eq!(known_zero_pattern(&p, 0.5, 0).unwrap().len(), 1);
        assert!(known_zero_pattern(&p, 0.0, 0).unwrap().is_empty());
        assert!(known_zero_pattern(&p, 1.5, 0).is_err());
    }

    #[test]
    fn single_trial_matches_direct_loss() {
        let spec = SyntheticSpec::new(4, 0.5, 30, 1, 9).unwrap();
        let grid = TuningGrid::new(GridParam::Rho, vec![0.3]).unwrap();
        let arms = [Arm {
            estimator: Estimator::Wasserstein,
            grid,
        }];
        let table = synthetic_benchmark(&spec, &arms).unwrap();
        assert_eq!(table.records.len(), 1);

        let sigma0 = synthetic_sigma0_direct(&spec);
        let data = sample_gaussian(&sigma0, 30, 9).unwrap();
        let m = sample_moments(&data, 30.0).unwrap();
        let x = WassersteinEstimator::default().estimate(&m, 0.3).unwrap();
        assert_eq!(table.records[0].loss, stein_loss(&x, &sigma0).unwrap());
    }

    fn synthetic_sigma0_direct(spec: &SyntheticSpec) -> SymmetricMatrix {
        crate::applications::synthetic_sigma0(spec)
    }
}
