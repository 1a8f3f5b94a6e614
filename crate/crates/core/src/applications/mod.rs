//! Experiment pipelines: the synthetic Stein-loss benchmark, linear discriminant analysis and
//! the minimum-variance portfolio backtest.

pub mod benchmark;
pub mod lda;
pub mod portfolio;
pub mod synthetic;

pub use benchmark::{
    known_zero_pattern, quantile, run_benchmark, synthetic_benchmark, trial_moments, trial_seed,
    true_zero_pairs, Arm, BenchmarkTable, Estimator, LossRecord, LossSummary,
};
pub use lda::{
    accuracy, lda_classify, lda_fit, lda_fit_rows, pooled_moments, ClassMeans, LabeledDataset,
    LdaEvaluator, LdaModel,
};
pub use portfolio::{
    min_variance_weights, rolling_backtest, BacktestConfig, BacktestReport, PortfolioEvaluator,
};
pub use synthetic::{
    precision_from_signs, sample_gaussian, sigma0_from_signs, sign_matrix, synthetic_sigma0,
    SyntheticSpec, DEFAULT_RIDGE,
};
