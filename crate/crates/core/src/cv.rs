//! Tuning grids and cross-validation.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{sample_moments_of_rows, stein_loss, Divisor, PrecisionEstimator};
use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridParam {
    Rho,
    Alpha,
}

impl GridParam {
    pub fn as_str(self) -> &'static str {
        match self {
            GridParam::Rho => "rho",
            GridParam::Alpha => "alpha",
        }
    }
}

/// Strictly increasing positive candidate values for one tuning parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningGrid {
    pub param: GridParam,
    values: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GridFile {
    LogSpaced {
        param: GridParam,
        log10_from: f64,
        log10_to: f64,
        points: usize,
    },
    Explicit {
        param: GridParam,
        values: Vec<f64>,
    },
}

impl TuningGrid {
    pub fn new(param: GridParam, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("grid has no values".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!(
                "grid value {v} is not positive and finite"
            )));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "grid values must be strictly increasing without duplicates".into(),
            ));
        }
        Ok(Self { param, values })
    }

    /// `points` values `10^t` with `t` evenly spaced from `log10_from` to `log10_to`.
    pub fn log_spaced(
        param: GridParam,
        log10_from: f64,
        log10_to: f64,
        points: usize,
    ) -> Result<Self> {
        if points == 0 || !log10_from.is_finite() || !log10_to.is_finite() {
            return Err(Error::Config(
                "log-spaced grid needs finite bounds and points ≥ 1".into(),
            ));
        }
        if points == 1 {
            return Self::new(param, vec![10f64.powf(log10_from)]);
        }
        let m = (points - 1) as f64;
        let values = (0..points)
            .map(|j| {
                let j = j as f64;
                10f64.powf(((m - j) * log10_from + j * log10_to) / m)
            })
            .collect();
        Self::new(param, values)
    }

    /// `{10^{j/20 − 1}}` for `j = 0..=60`, used for classification.
    pub fn classification_rho() -> Self {
        Self::log_spaced(GridParam::Rho, -1.0, 2.0, 61).expect("constant grid")
    }

    /// `{10^{j/20 − 3}}` for `j = 0..=60`.
    pub fn classification_alpha() -> Self {
        Self::log_spaced(GridParam::Alpha, -3.0, 0.0, 61).expect("constant grid")
    }

    /// `{10^{j/100 − 2}}` for `j = 0..=200`, used for portfolios.
    pub fn portfolio_rho() -> Self {
        Self::log_spaced(GridParam::Rho, -2.0, 0.0, 201).expect("constant grid")
    }

    /// `{10^{j/100 − 2}}` for `j = 0..=200`.
    pub fn portfolio_alpha() -> Self {
        Self::log_spaced(GridParam::Alpha, -2.0, 0.0, 201).expect("constant grid")
    }

    /// Parses `{"param", "log10_from", "log10_to", "points"}` or `{"param", "values"}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: GridFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        match file {
            GridFile::LogSpaced {
                param,
                log10_from,
                log10_to,
                points,
            } => Self::log_spaced(param, log10_from, log10_to, points),
            GridFile::Explicit { param, values } => Self::new(param, values),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CvScheme {
    LeaveOneOut,
    KFold(usize),
}

impl CvScheme {
    /// Parses `loo` or `kfold:K`.
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "loo" => Ok(Self::LeaveOneOut),
            _ => text
                .strip_prefix("kfold:")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 2)
                .map(Self::KFold)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown scheme '{text}', expected loo or kfold:K with K ≥ 2"
                    ))
                }),
        }
    }

    /// Validation index sets. Leave-one-out ignores the seed; K-fold shuffles `0..n` with
    /// a ChaCha8 generator seeded by `seed` and deals it into `K` contiguous blocks whose
    /// sizes differ by at most one.
    pub fn folds(self, n: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
        match self {
            Self::LeaveOneOut => {
                if n < 2 {
                    return Err(Error::Config(
                        "leave-one-out needs at least 2 observations".into(),
                    ));
                }
                Ok((0..n).map(|i| vec![i]).collect())
            }
            Self::KFold(k) => {
                if k < 2 || n < k {
                    return Err(Error::Config(format!(
                        "{k}-fold needs K ≥ 2 and at least K observations, got {n}"
                    )));
                }
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let (base, extra) = (n / k, n % k);
                let mut folds = Vec::with_capacity(k);
                let mut start = 0;
                for f in 0..k {
                    let len = base + usize::from(f < extra);
                    let mut fold = order[start..start + len].to_vec();
                    fold.sort_unstable();
                    folds.push(fold);
                    start += len;
                }
                Ok(folds)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreDirection {
    Minimize,
    Maximize,
}

impl ScoreDirection {
    /// Score assigned when the estimator fails.
    pub fn worst(self) -> f64 {
        match self {
            Self::Minimize => f64::INFINITY,
            Self::Maximize => f64::NEG_INFINITY,
        }
    }

    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Self::Minimize => a < b,
            Self::Maximize => a > b,
        }
    }
}

/// Scores one parameter value on one train/validation split.
pub trait FoldEvaluator: Sync {
    fn direction(&self) -> ScoreDirection;
    fn evaluate(&self, train: &[usize], validation: &[usize], param: f64) -> Result<f64>;
}

#[derive(Debug, Clone, Serialize)]
pub struct CvFailure {
    pub grid_index: usize,
    pub fold: usize,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CvReport {
    pub param: GridParam,
    pub values: Vec<f64>,
    pub direction: ScoreDirection,
    pub scheme: CvScheme,
    pub seed: u64,
    /// Mean validation score per grid point.
    pub mean_scores: Vec<f64>,
    /// `fold_scores[g][k]`: score of grid point `g` on fold `k`.
    pub fold_scores: Vec<Vec<f64>>,
    pub failures: Vec<CvFailure>,
    pub selected_index: usize,
    pub selected_value: f64,
}

/// Index of the best mean score; ties go to the smaller parameter value.
pub fn select_best(mean_scores: &[f64], direction: ScoreDirection) -> usize {
    let mut best = 0;
    for (i, &s) in mean_scores.iter().enumerate().skip(1) {
        if direction.better(s, mean_scores[best]) {
            best = i;
        }
    }
    best
}

/// Evaluates every grid point on every fold and selects the best mean score. Failing
/// evaluations (including non-finite scores) receive the worst possible score.
pub fn cross_validate(
    n: usize,
    grid: &TuningGrid,
    scheme: CvScheme,
    seed: u64,
    evaluator: &dyn FoldEvaluator,
) -> Result<CvReport> {
    let folds = scheme.folds(n, seed)?;
    let trains: Vec<Vec<usize>> = folds
        .iter()
        .map(|v| {
            let mut mask = vec![true; n];
            v.iter().for_each(|&i| mask[i] = false);
            (0..n).filter(|&i| mask[i]).collect()
        })
        .collect();
    let direction = evaluator.direction();
    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..folds.len()).map(move |k| (g, k)))
        .collect();
    let results: Vec<(usize, usize, std::result::Result<f64, String>)> = tasks
        .par_iter()
        .map(|&(g, k)| {
            let r = evaluator
                .evaluate(&trains[k], &folds[k], grid.values()[g])
                .map_err(|e| e.to_string())
                .and_then(|s| {
                    if s.is_nan() {
                        Err("score is NaN".to_string())
                    } else {
                        Ok(s)
                    }
                });
            (g, k, r)
        })
        .collect();

    let mut fold_scores = vec![vec![0.0; folds.len()]; grid.len()];
    let mut failures = Vec::new();
    for (g, k, r) in results {
        fold_scores[g][k] = match r {
            Ok(s) => s,
            Err(message) => {
                failures.push(CvFailure {
                    grid_index: g,
                    fold: k,
                    message,
                });
                direction.worst()
            }
        };
    }
    let mean_scores: Vec<f64> = fold_scores
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect();
    let selected_index = select_best(&mean_scores, direction);
    Ok(CvReport {
        param: grid.param,
        values: grid.values().to_vec(),
        direction,
        scheme,
        seed,
        mean_scores,
        fold_scores,
        failures,
        selected_index,
        selected_value: grid.values()[selected_index],
    })
}

/// `⟨X̂, S⟩ − log det X̂`: Stein's loss of `X̂` against `S` up to terms that do not
/// depend on `X̂`. Finite even when `S` is singular, e.g. a one-observation fold.
pub fn held_out_stein_score(
    x_hat: &SymmetricMatrix,
    second_moment: &SymmetricMatrix,
) -> Result<f64> {
    Ok(x_hat.inner(second_moment) - x_hat.log_det()?)
}

/// Estimator trained on the training rows, scored by [`held_out_stein_score`] against
/// the validation rows' second moment about the training mean.
pub struct SteinEvaluator<'a, E: PrecisionEstimator> {
    pub data: &'a DMatrix<f64>,
    pub estimator: &'a E,
    pub divisor: Divisor,
}

impl<E: PrecisionEstimator> FoldEvaluator for SteinEvaluator<'_, E> {
    fn direction(&self) -> ScoreDirection {
        ScoreDirection::Minimize
    }

    fn evaluate(&self, train: &[usize], validation: &[usize], param: f64) -> Result<f64> {
        let moments = sample_moments_of_rows(self.data, train, self.divisor)?;
        let x = self.estimator.estimate(&moments, param)?;
        let mut centered = self.data.select_rows(validation);
        for mut row in centered.row_iter_mut() {
            row -= moments.mean.transpose();
        }
        let second = SymmetricMatrix::symmetrize(
            &(centered.transpose() * &centered / validation.len() as f64),
        )?;
        held_out_stein_score(&x, &second)
    }
}

/// For each fold `k`, trains on the rows of fold `k` and returns Stein's loss against the
/// covariance of all other rows.
pub fn kfold_stein(
    data: &DMatrix<f64>,
    folds: &[Vec<usize>],
    estimator: &dyn PrecisionEstimator,
    param: f64,
    divisor: Divisor,
) -> Result<Vec<f64>> {
    if folds.len() < 2 {
        return Err(Error::Config("at least two folds are required".into()));
    }
    let n = data.nrows();
    folds
        .iter()
        .map(|fold| {
            if fold.iter().any(|&i| i >= n) {
                return Err(Error::Invalid("fold index out of range".into()));
            }
            let rest: Vec<usize> = (0..n).filter(|i| !fold.contains(i)).collect();
            let train = sample_moments_of_rows(data, fold, divisor)?;
            let reference = sample_moments_of_rows(data, &rest, divisor)?;
            let x = estimator.estimate(&train, param)?;
            stein_loss(&x, &reference.covariance)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grids() {
        let g = TuningGrid::classification_rho();
        assert_eq!(g.len(), 61);
        for (j, v) in g.values().iter().enumerate() {
            assert!((v / 10f64.powf(j as f64 / 20.0 - 1.0) - 1.0).abs() < 1e-14);
        }
        let a = TuningGrid::portfolio_alpha();
        assert_eq!(a.len(), 201);
        assert!((a.values()[0] - 0.01).abs() < 1e-17 && (a.values()[200] - 1.0).abs() < 1e-15);
        assert!((TuningGrid::classification_alpha().values()[0] - 1e-3).abs() < 1e-18);
        assert_eq!(TuningGrid::portfolio_rho().len(), 201);
    }

    #[test]
    fn grid_validation_and_json() {
        assert!(TuningGrid::new(GridParam::Rho, vec![0.1, 0.1]).is_err());
        assert!(TuningGrid::new(GridParam::Rho, vec![0.2, 0.1]).is_err());
        assert!(TuningGrid::new(GridParam::Rho, vec![0.0]).is_err());
        let g = TuningGrid::from_json_str(
            r#"{"param": "rho", "log10_from": -1, "log10_to": 2, "points": 61}"#,
        )
        .unwrap();
        assert_eq!(g, TuningGrid::classification_rho());
        let e = TuningGrid::from_json_str(r#"{"param": "alpha", "values": [0.5]}"#).unwrap();
        assert_eq!((e.param, e.values()), (GridParam::Alpha, &[0.5][..]));
        assert!(TuningGrid::from_json_str(r#"{"param": "beta", "values": [0.5]}"#).is_err());
    }

    #[test]
    fn fold_partitions() {
        let f = CvScheme::KFold(3).folds(10, 7).unwrap();
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 3, 3]);
        assert_eq!(f, CvScheme::KFold(3).folds(10, 7).unwrap());
        assert_ne!(f, CvScheme::KFold(3).folds(10, 8).unwrap());
        assert_eq!(
            CvScheme::LeaveOneOut.folds(3, 0).unwrap(),
            vec![vec![0], vec![1], vec![2]]
        );
        assert!(CvScheme::KFold(4).folds(3, 0).is_err());
        assert!(CvScheme::LeaveOneOut.folds(1, 0).is_err());
        assert_eq!(CvScheme::parse("kfold:13").unwrap(), CvScheme::KFold(13));
        assert!(CvScheme::parse("kfold:1").is_err());
    }

    #[test]
    fn ties_pick_smallest_parameter() {
        assert_eq!(select_best(&[1.0, 0.5, 0.5], ScoreDirection::Minimize), 1);
        assert_eq!(select_best(&[0.9, 0.9, 0.1], ScoreDirection::Maximize), 0);
        assert_eq!(
            select_best(&[f64::INFINITY, f64::INFINITY], ScoreDirection::Minimize),
            0
        );
    }
}
