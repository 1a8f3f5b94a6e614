use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;
use wass_shrink::applications::{
    accuracy, lda_fit, rolling_backtest, synthetic_benchmark, Arm, BacktestConfig, BacktestReport,
    Estimator, LabeledDataset, LdaEvaluator, PortfolioEvaluator, SyntheticSpec,
};
use wass_shrink::baselines::{
    sample_moments, Divisor, LinearShrinkageEstimator, PrecisionEstimator, WassersteinEstimator,
};
use wass_shrink::cv::{cross_validate, CvReport, CvScheme, GridParam, SteinEvaluator, TuningGrid};
use wass_shrink::io::{format_f64, matrix_to_string, read_labels, read_matrix, Versioned};
use wass_shrink::shrinkage::{wasserstein_shrinkage, DEFAULT_GAMMA_TOL};
use wass_shrink::sqa::{sqa_gradient, sqa_solve, SolverConfig, SparsityPattern, Termination};
use wass_shrink::worst_case::{extremal_covariance, extremal_for_optimal, extremal_gamma};
use wass_shrink::SymmetricMatrix;

use crate::{
    DivisorArg, EstimateArgs, LdaArgs, PortfolioArgs, SolverArgs, SyntheticArgs, TuneArgs,
    WorstCaseArgs,
};

/// Largest accepted gap between the attained and the requested radius.
const RADIUS_TOL: f64 = 1e-6;

pub struct CliError {
    pub message: String,
    user: bool,
}

impl CliError {
    fn user(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            user: true,
        }
    }

    fn solver(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            user: false,
        }
    }

    pub fn exit_code(&self) -> u8 {
        if self.user {
            1
        } else {
            2
        }
    }
}

impl From<wass_shrink::Error> for CliError {
    fn from(e: wass_shrink::Error) -> Self {
        Self {
            user: e.is_user_error(),
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

fn in_file<T>(path: &Path, r: wass_shrink::Result<T>) -> CliResult<T> {
    r.map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

fn load_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    let text = read_text(path)?;
    in_file(path, read_matrix(text.as_bytes()))
}

fn load_symmetric(path: &Path) -> CliResult<SymmetricMatrix> {
    let m = load_matrix(path)?;
    in_file(path, SymmetricMatrix::new(m))
}

fn load_grid(path: Option<&PathBuf>, default: TuningGrid) -> CliResult<TuningGrid> {
    match path {
        Some(p) => in_file(p, TuningGrid::from_json_str(&read_text(p)?)),
        None => Ok(default),
    }
}

fn load_pattern(path: Option<&PathBuf>, dim: usize) -> CliResult<Option<SparsityPattern>> {
    let Some(p) = path else { return Ok(None) };
    let pattern = in_file(p, SparsityPattern::from_json_str(&read_text(p)?))?;
    if pattern.dim() != dim {
        return Err(CliError::user(format!(
            "{}: pattern is for dimension {}, data has {dim} columns",
            p.display(),
            pattern.dim()
        )));
    }
    Ok(Some(pattern))
}

fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::user(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sample_divisor(arg: DivisorArg) -> CliResult<Divisor> {
    match arg {
        DivisorArg::N => Ok(Divisor::N),
        DivisorArg::NMinusOne => Ok(Divisor::NMinusOne),
        DivisorArg::Pooled => Err(CliError::user(
            "divisor 'pooled' applies to lda only; use n or n-1",
        )),
    }
}

fn solver_config(args: &SolverArgs) -> CliResult<SolverConfig> {
    let mut config = SolverConfig::accelerated();
    if let Some(tol) = args.tol {
        config.grad_tol = tol;
    }
    if let Some(m) = args.max_iters {
        config.max_iters = m;
    }
    config.validate()?;
    Ok(config)
}

fn rows_of(m: &SymmetricMatrix) -> Vec<Vec<f64>> {
    m.as_matrix()
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect()
}

#[derive(Serialize)]
struct EstimateDiagnostics {
    method: &'static str,
    rho: f64,
    dim: usize,
    samples: usize,
    divisor: f64,
    gamma_star: f64,
    objective: f64,
    iterations: usize,
    projected_grad_norm: Option<f64>,
    termination: Option<Termination>,
    regularization: f64,
    wall_ms: f64,
}

pub fn estimate(args: EstimateArgs) -> CliResult<()> {
    let data = load_matrix(&args.input)?;
    let divisor = sample_divisor(args.divisor)?.resolve(data.nrows())?;
    let moments = sample_moments(&data, divisor)?;
    let pattern = load_pattern(args.pattern.as_ref(), data.ncols())?;
    let config = solver_config(&args.solver)?;
    let start = Instant::now();
    let (solution, iterations, grad, termination, regularization) = match &pattern {
        Some(pattern) => {
            let (sol, trace) = sqa_solve(&moments.covariance, args.rho, pattern, &config)?;
            let last = trace.final_record().projected_grad_norm;
            if !trace.converged() {
                return Err(CliError::solver(format!(
                    "no convergence within {} iterations (projected gradient norm {last:e})",
                    trace.iterations()
                )));
            }
            (
                sol,
                trace.iterations(),
                Some(last),
                Some(trace.termination),
                trace.regularization,
            )
        }
        None => {
            let sol = wasserstein_shrinkage(&moments.covariance, args.rho, DEFAULT_GAMMA_TOL)?;
            let grad = sqa_gradient(
                &moments.covariance,
                &sol.precision,
                sol.dual_multiplier,
                args.rho,
            )
            .ok()
            .map(|(g, s)| (g.frobenius_norm().powi(2) + s * s).sqrt());
            (sol, 0, grad, None, 0.0)
        }
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let diagnostics = Versioned::new(EstimateDiagnostics {
        method: if pattern.is_some() {
            "sqa"
        } else {
            "analytical"
        },
        rho: args.rho,
        dim: data.ncols(),
        samples: data.nrows(),
        divisor,
        gamma_star: solution.dual_multiplier,
        objective: solution.objective,
        iterations,
        projected_grad_norm: grad,
        termination,
        regularization,
        wall_ms,
    })
    .to_json_string();
    let matrix = matrix_to_string(solution.precision.as_matrix());
    match &args.output {
        Some(path) => {
            write_text(Some(path), &matrix)?;
            write_text(Some(&path.with_extension("json")), &diagnostics)
        }
        None => {
            print!("{matrix}");
            eprint!("{diagnostics}");
            Ok(())
        }
    }
}

fn report_json(report: &CvReport, path: Option<&Path>) -> CliResult<()> {
    write_text(path, &Versioned::new(report).to_json_string())
}

pub fn tune(args: TuneArgs) -> CliResult<()> {
    let data = load_matrix(&args.input)?;
    let grid = load_grid(args.grid.as_ref(), TuningGrid::classification_rho())?;
    let scheme = CvScheme::parse(&args.cv)?;
    let divisor = sample_divisor(args.divisor)?;
    let n = data.nrows();
    let report = match grid.param {
        GridParam::Rho => {
            let estimator = WassersteinEstimator {
                pattern: load_pattern(args.pattern.as_ref(), data.ncols())?,
                solver: solver_config(&args.solver)?,
            };
            let evaluator = SteinEvaluator {
                data: &data,
                estimator: &estimator,
                divisor,
            };
            cross_validate(n, &grid, scheme, args.seed, &evaluator)?
        }
        GridParam::Alpha => {
            if args.pattern.is_some() {
                return Err(CliError::user("--pattern requires a rho grid"));
            }
            let evaluator = SteinEvaluator {
                data: &data,
                estimator: &LinearShrinkageEstimator,
                divisor,
            };
            cross_validate(n, &grid, scheme, args.seed, &evaluator)?
        }
    };
    report_json(&report, args.output.as_deref())
}

#[derive(Serialize)]
struct WorstCaseOutput {
    rho: f64,
    multiplier: f64,
    attained_distance: f64,
    attained_value: f64,
    covariance: Vec<Vec<f64>>,
}

pub fn worstcase(args: WorstCaseArgs) -> CliResult<()> {
    let cov = load_symmetric(&args.input)?;
    let dist = match &args.precision {
        Some(path) => {
            let x = load_symmetric(path)?;
            let gamma = extremal_gamma(&cov, &x, args.rho)?;
            extremal_covariance(&cov, &x, gamma)?
        }
        None => extremal_for_optimal(&cov, args.rho)?,
    };
    if !((dist.attained_distance - args.rho).abs() <= RADIUS_TOL) {
        return Err(CliError::solver(format!(
            "attained distance {} differs from the radius {}",
            dist.attained_distance, args.rho
        )));
    }
    let out = Versioned::new(WorstCaseOutput {
        rho: args.rho,
        multiplier: dist.multiplier,
        attained_distance: dist.attained_distance,
        attained_value: dist.attained_value,
        covariance: rows_of(&dist.covariance),
    });
    write_text(args.output.as_deref(), &out.to_json_string())
}

pub fn synthetic(args: SyntheticArgs) -> CliResult<()> {
    let spec = SyntheticSpec::new(args.dim, args.density, args.samples, args.trials, args.seed)?;
    let default = TuningGrid::log_spaced(GridParam::Rho, -2.0, 1.0, 31)?;
    let grid = load_grid(args.grid.as_ref(), default)?;
    if grid.param != GridParam::Rho {
        return Err(CliError::user("the synthetic benchmark needs a rho grid"));
    }
    let solver = solver_config(&args.solver)?;
    let mut arms = vec![Arm {
        estimator: Estimator::Wasserstein,
        grid: grid.clone(),
    }];
    for &known_fraction in &args.known_fraction {
        arms.push(Arm {
            estimator: Estimator::SparseWasserstein {
                known_fraction,
                solver: solver.clone(),
            },
            grid: grid.clone(),
        });
    }
    let table = synthetic_benchmark(&spec, &arms)?;
    let mut out = String::from("trial,estimator,param,loss\n");
    for r in &table.records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.trial,
            r.estimator,
            format_f64(r.param),
            format_f64(r.loss)
        ));
    }
    write_text(args.output.as_deref(), &out)
}

#[derive(Serialize)]
struct LdaOutput<'a> {
    classes: &'a [String],
    selected: f64,
    training_accuracy: f64,
    cv: &'a CvReport,
}

pub fn lda(args: LdaArgs) -> CliResult<()> {
    if args.divisor != DivisorArg::Pooled {
        return Err(CliError::user(
            "lda uses the pooled within-class covariance; use --divisor pooled",
        ));
    }
    let features = load_matrix(&args.input)?;
    let labels = {
        let text = read_text(&args.labels)?;
        in_file(
            &args.labels,
            read_labels(text.as_bytes(), Some(features.nrows())),
        )?
    };
    let data = LabeledDataset::new(features, &labels)?;
    let grid = load_grid(args.grid.as_ref(), TuningGrid::classification_rho())?;
    let scheme = CvScheme::parse(&args.cv)?;
    let estimator: Box<dyn PrecisionEstimator> = match grid.param {
        GridParam::Rho => Box::new(WassersteinEstimator::default()),
        GridParam::Alpha => Box::new(LinearShrinkageEstimator),
    };
    let evaluator = LdaEvaluator {
        data: &data,
        estimator: estimator.as_ref(),
    };
    let report = cross_validate(data.len(), &grid, scheme, args.seed, &evaluator)?;
    let model = lda_fit(&data, estimator.as_ref(), report.selected_value)?;
    let all: Vec<usize> = (0..data.len()).collect();
    let out = Versioned::new(LdaOutput {
        classes: data.classes(),
        selected: report.selected_value,
        training_accuracy: accuracy(&model, &data, &all)?,
        cv: &report,
    });
    write_text(args.output.as_deref(), &out.to_json_string())
}

#[derive(Serialize)]
struct PortfolioOutput {
    rho: f64,
    window: usize,
    stride: usize,
    tuning: Option<CvReport>,
    backtest: BacktestReport,
}

pub fn portfolio(args: PortfolioArgs) -> CliResult<()> {
    let returns = load_matrix(&args.input)?;
    let config = BacktestConfig::new(args.window, args.stride, 0.0)?;
    if returns.nrows() <= args.window {
        return Err(CliError::user(format!(
            "{} periods do not exceed the window of {}",
            returns.nrows(),
            args.window
        )));
    }
    let estimator = WassersteinEstimator::default();
    let (rho, tuning) = match args.rho {
        Some(rho) => (rho, None),
        None => {
            let grid = load_grid(args.grid.as_ref(), TuningGrid::portfolio_rho())?;
            if grid.param != GridParam::Rho {
                return Err(CliError::user("portfolio tuning needs a rho grid"));
            }
            let first = returns.rows(0, args.window).into_owned();
            let evaluator = PortfolioEvaluator {
                returns: &first,
                estimator: &estimator,
            };
            let scheme = CvScheme::parse(&args.cv)?;
            let report = cross_validate(args.window, &grid, scheme, args.seed, &evaluator)?;
            (report.selected_value, Some(report))
        }
    };
    let backtest = rolling_backtest(
        &returns,
        &estimator,
        &BacktestConfig {
            param: rho,
            ..config
        },
    )?;
    let out = Versioned::new(PortfolioOutput {
        rho,
        window: args.window,
        stride: args.stride,
        tuning,
        backtest,
    });
    write_text(args.output.as_deref(), &out.to_json_string())
}
