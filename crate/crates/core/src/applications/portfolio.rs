use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::baselines::{sample_moments_of_rows, Divisor, PrecisionEstimator};
use crate::cv::{FoldEvaluator, ScoreDirection};
use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

/// `X̂𝟙 / (𝟙ᵀX̂𝟙)`, renormalized so the weights sum to one.
pub fn min_variance_weights(precision: &SymmetricMatrix) -> Result<DVector<f64>> {
    let raw: DVector<f64> = precision.as_matrix().column_sum();
    let denom = raw.sum();
    if !(denom > 1e-12) {
        return Err(Error::Singular("1ᵀX1 is not positive"));
    }
    let w = raw / denom;
    let s = w.sum();
    Ok(w / s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacktestConfig {
    pub window: usize,
    pub stride: usize,
    pub param: f64,
}

impl BacktestConfig {
    pub fn new(window: usize, stride: usize, param: f64) -> Result<Self> {
        if window < 2 {
            return Err(Error::Config("window must be at least 2".into()));
        }
        if stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        Ok(Self {
            window,
            stride,
            param,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BacktestReport {
    pub returns: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation with divisor `m − 1`.
    pub std: f64,
    /// `mean / std`; `None` when the standard deviation vanishes or is undefined.
    pub sharpe: Option<f64>,
    pub rebalances: usize,
}

fn summarize(returns: Vec<f64>, rebalances: usize) -> BacktestReport {
    let m = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / m;
    let std = if returns.len() > 1 {
        (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        f64::NAN
    };
    let sharpe = (std > 0.0).then(|| mean / std);
    BacktestReport {
        returns,
        mean,
        std,
        sharpe,
        rebalances,
    }
}

/// Rolling-horizon evaluation of `returns` (periods × assets): every `stride` periods the
/// precision is re-estimated from the trailing `window` rows with divisor `n − 1` and held
/// until the next rebalance.
pub fn rolling_backtest(
    returns: &DMatrix<f64>,
    estimator: &dyn PrecisionEstimator,
    config: &BacktestConfig,
) -> Result<BacktestReport> {
    let periods = returns.nrows();
    if periods <= config.window {
        return Err(Error::Config(format!(
            "{periods} periods do not exceed the window of {}",
            config.window
        )));
    }
    let mut out = Vec::with_capacity(periods - config.window);
    let mut rebalances = 0;
    let mut start = config.window;
    while start < periods {
        let rows: Vec<usize> = (start - config.window..start).collect();
        let weights = sample_moments_of_rows(returns, &rows, Divisor::NMinusOne)
            .and_then(|m| estimator.estimate(&m, config.param))
            .and_then(|x| min_variance_weights(&x))
            .map_err(|e| Error::Window {
                index: rebalances,
                source: Box::new(e),
            })?;
        for t in start..(start + config.stride).min(periods) {
            out.push(returns.row(t).transpose().dot(&weights));
        }
        rebalances += 1;
        start += config.stride;
    }
    Ok(summarize(out, rebalances))
}

/// Cross-validation score: mean squared deviation of held-out portfolio returns from the
/// training-period portfolio mean.
pub struct PortfolioEvaluator<'a> {
    pub returns: &'a DMatrix<f64>,
    pub estimator: &'a dyn PrecisionEstimator,
}

impl FoldEvaluator for PortfolioEvaluator<'_> {
    fn direction(&self) -> ScoreDirection {
        ScoreDirection::Minimize
    }

    fn evaluate(&self, train: &[usize], validation: &[usize], param: f64) -> Result<f64> {
        let moments = sample_moments_of_rows(self.returns, train, Divisor::NMinusOne)?;
        let w = min_variance_weights(&self.estimator.estimate(&moments, param)?)?;
        let center = moments.mean.dot(&w);
        let total: f64 = validation
            .iter()
            .map(|&r| (self.returns.row(r).transpose().dot(&w) - center).powi(2))
            .sum();
        Ok(total / validation.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::SampleMoments;

    #[test]
    fn weights_closed_forms() {
        let w = min_variance_weights(&SymmetricMatrix::identity(4)).unwrap();
        assert!(w.iter().all(|v| (v - 0.25).abs() < 1e-16));
        let w =
            min_variance_weights(&SymmetricMatrix::from_diagonal(&[4.0, 1.0]).unwrap()).unwrap();
        assert!((w[0] - 0.8).abs() < 1e-15 && (w[1] - 0.2).abs() < 1e-15);
        let bad = SymmetricMatrix::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]).unwrap();
        assert!(min_variance_weights(&bad).is_err());
    }

    #[test]
    fn constant_returns_have_no_sharpe() {
        let returns = DMatrix::from_element(10, 2, 0.01);
        let ridge =
            |m: &SampleMoments, _: f64| Ok(m.covariance.shift_diagonal(1.0).inverse_pd().unwrap());
        let r =
            rolling_backtest(&returns, &ridge, &BacktestConfig::new(4, 2, 0.0).unwrap()).unwrap();
        assert_eq!(r.std, 0.0);
        assert!(r.sharpe.is_none());
        assert_eq!(r.returns.len(), 6);
        assert_eq!(r.rebalances, 3);
    }

    #[test]
    fn window_failure_reports_index() {
        let returns = DMatrix::from_fn(8, 2, |i, j| (i * 3 + j) as f64);
        let failing = |m: &SampleMoments, _: f64| {
            if m.mean[0] > 8.0 {
                Err(Error::Singular("stub"))
            } else {
                Ok(SymmetricMatrix::identity(2))
            }
        };
        let err = rolling_backtest(&returns, &failing, &BacktestConfig::new(3, 2, 0.0).unwrap())
            .unwrap_err();
        assert!(matches!(err, Error::Window { index: 1, .. }), "{err}");
        assert!(BacktestConfig::new(1, 1, 0.0).is_err());
        assert!(
            rolling_backtest(&returns, &failing, &BacktestConfig::new(8, 1, 0.0).unwrap()).is_err()
        );
    }
}
