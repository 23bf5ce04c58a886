//! Solver dispatch, evaluation and artifact writing for one configured run.

use std::path::Path;
use std::thread;

use crate::appgrad::{self, AppGradState, Init};
use crate::baselines::{dw_cca, nw_cca, pca_cca, RsvdParams};
use crate::config::{SolverConfig, SolverKind};
use crate::error::{CcaError, Result};
use crate::kernel::{kernel_cca, kernel_gram};
use crate::matrix::DataMatrix;
use crate::metrics::RunReport;
use crate::problem::CcaProblem;
use crate::random;
use crate::reference::{als_cca, qr_cca, spectral_cca, AlsOptions, CcaModel};
use crate::stochastic;
use crate::trace::Evaluation;

use super::io;

#[derive(Debug, Clone, Default)]
pub struct ExperimentOptions {
    /// Skip the spectral oracle (PCC columns are then absent).
    pub skip_oracle: bool,
    /// Use this model as the oracle instead of computing one.
    pub oracle: Option<CcaModel>,
    /// Include wall-clock seconds in trace records.
    pub timing: bool,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: CcaModel,
    pub report: RunReport,
    pub oracle: Option<CcaModel>,
}

/// Rough cost of forming both Grams, the cross-covariance and two `p^3` factorizations.
fn direct_flops(x: &DataMatrix, y: &DataMatrix) -> f64 {
    let (n, p1, p2) = (x.nrows() as f64, x.ncols() as f64, y.ncols() as f64);
    2.0 * n * (p1 * p1 + p2 * p2 + p1 * p2) + 10.0 * (p1.powi(3) + p2.powi(3))
}

/// Randomized SVD of an implicit `p1 x p2` operator with `q` power iterations.
fn rsvd_flops(x: &DataMatrix, y: &DataMatrix, width: usize, power_iters: usize) -> f64 {
    let passes = 2.0 * (power_iters as f64 + 1.0);
    passes * 2.0 * (x.nnz() + y.nnz()) as f64 * width as f64
}

fn single_record_report(
    config: &SolverConfig,
    eval: &Evaluation,
    model: &CcaModel,
    flops: f64,
    iterations: usize,
    converged: bool,
) -> Result<RunReport> {
    let mut report = RunReport::new(config.solver.name(), config.seed, config.to_map());
    report.push(eval.record(iterations, flops, &model.phi, &model.psi, None)?)?;
    report.iterations = iterations;
    report.converged = converged;
    report.total_flops = flops;
    Ok(report)
}

fn dispatch(config: &SolverConfig, x: &DataMatrix, y: &DataMatrix, eval: &Evaluation) -> Result<(CcaModel, RunReport)> {
    let params = RsvdParams { power_iters: config.power_iters, seed: config.seed, ..RsvdParams::default() };
    let rsvd_width = config.k + params.oversample;
    let (model, flops) = match config.solver {
        SolverKind::AppGrad => {
            let problem = CcaProblem::new(x, y, config.lambda)?;
            return appgrad::run_appgrad(&problem, config, Init::Random, eval);
        }
        SolverKind::StochasticAppGrad => {
            let problem = CcaProblem::new(x, y, config.lambda)?;
            return stochastic::run_configured(&problem, config, eval);
        }
        SolverKind::KernelAppGrad => unreachable!("kernel runs are dispatched separately"),
        SolverKind::Als => {
            if config.k != 1 {
                return Err(CcaError::Config(format!("als computes a single pair; got k = {}", config.k)));
            }
            let problem = CcaProblem::new(x, y, config.lambda)?;
            let start = AppGradState::random(&problem, 1, config.seed)?;
            let options = AlsOptions { max_iters: config.max_iters, tol: config.tol };
            let out = als_cca(&problem, &start.phi.column(0).into_owned(), &start.psi.column(0).into_owned(), options)?;
            let model = CcaModel {
                phi: nalgebra::DMatrix::from_column_slice(out.phi.len(), 1, out.phi.as_slice()),
                psi: nalgebra::DMatrix::from_column_slice(out.psi.len(), 1, out.psi.as_slice()),
                correlations: nalgebra::DVector::from_element(1, out.correlation),
                unwhitened: false,
            };
            let per = appgrad::step_flops(&problem, 1);
            let report = single_record_report(config, eval, &model, per * out.iterations as f64, out.iterations, out.converged)?;
            return Ok((model, report));
        }
        SolverKind::Spectral => (spectral_cca(x, y, config.k, config.lambda)?, direct_flops(x, y)),
        SolverKind::Qr => (qr_cca(x, y, config.k, config.lambda)?, direct_flops(x, y)),
        SolverKind::Nw => (nw_cca(x, y, config.k, params)?, rsvd_flops(x, y, rsvd_width, params.power_iters)),
        SolverKind::Dw => (dw_cca(x, y, config.k, config.lambda, params)?, rsvd_flops(x, y, rsvd_width, params.power_iters)),
        SolverKind::PcaCca => {
            let max = x.ncols().min(y.ncols()).min(x.nrows());
            let m = config.pca_m.unwrap_or((4 * config.k).min(max));
            let flops = rsvd_flops(x, x, m + params.oversample, params.power_iters)
                + rsvd_flops(y, y, m + params.oversample, params.power_iters)
                + 2.0 * x.nrows() as f64 * (3 * m * m) as f64;
            (pca_cca(x, y, config.k, m, config.lambda, params)?, flops)
        }
    };
    let report = single_record_report(config, eval, &model, flops, 0, true)?;
    Ok((model, report))
}

fn run_kernel(config: &SolverConfig, x: &DataMatrix, y: &DataMatrix) -> Result<Experiment> {
    let spec = config.kernel.ok_or_else(|| CcaError::Config("kernel-appgrad needs a kernel".into()))?;
    let mut kx = kernel_gram(x, spec)?;
    let mut ky = kernel_gram(y, spec)?;
    if config.kernel_center {
        kx = kx.centered();
        ky = ky.centered();
    }
    let lambda = (config.lambda > 0.0).then_some(config.lambda);
    let out = kernel_cca(&kx, &ky, config.k, lambda, config)?;
    let model = CcaModel { phi: out.w_x, psi: out.w_y, correlations: out.correlations, unwhitened: false };
    Ok(Experiment { model, report: out.report, oracle: None })
}

/// Runs one configured solver on `(x, y)`.
///
/// With `config.holdout > 0` a seeded fraction of rows is held out; the solver
/// and oracle see only the remaining rows and holdout TCC/PCC are recorded.
/// Kernel runs ignore the holdout.
pub fn run_experiment(config: &SolverConfig, x: &DataMatrix, y: &DataMatrix, options: &ExperimentOptions) -> Result<Experiment> {
    config.validate()?;
    if x.nrows() != y.nrows() {
        return Err(CcaError::Dimension(format!("views have {} and {} rows", x.nrows(), y.nrows())));
    }
    if config.solver == SolverKind::KernelAppGrad {
        return run_kernel(config, x, y);
    }
    let split = (config.holdout > 0.0).then(|| {
        let (train, hold) = random::holdout_split(x.nrows(), config.holdout, random::derive(config.seed, random::streams::SPLIT));
        (x.select_rows(&train), y.select_rows(&train), x.select_rows(&hold), y.select_rows(&hold))
    });
    let (tx, ty) = match &split {
        Some((a, b, _, _)) => (a, b),
        None => (x, y),
    };
    let oracle = match (&options.oracle, options.skip_oracle) {
        (Some(o), _) => Some(o.clone()),
        (None, true) => None,
        (None, false) => Some(spectral_cca(tx, ty, config.k, config.lambda)?),
    };
    let mut eval = Evaluation::new(tx, ty).with_timing(options.timing);
    if let Some(o) = &oracle {
        eval = eval.with_oracle(o)?;
    }
    if let Some((_, _, hx, hy)) = &split {
        eval = eval.with_holdout(hx, hy, oracle.as_ref())?;
    }
    if let Some(every) = config.eval_every {
        eval = eval.every(every);
    }
    let (model, report) = dispatch(config, tx, ty, &eval)?;
    Ok(Experiment { model, report, oracle })
}

/// Runs several solvers on the same data concurrently; results keep the input order.
pub fn compare(
    config: &SolverConfig,
    solvers: &[SolverKind],
    x: &DataMatrix,
    y: &DataMatrix,
    options: &ExperimentOptions,
) -> Vec<(SolverKind, Result<Experiment>)> {
    let mut options = options.clone();
    if options.oracle.is_none() && !options.skip_oracle && config.holdout == 0.0 {
        options.oracle = spectral_cca(x, y, config.k, config.lambda).ok();
    }
    thread::scope(|s| {
        let handles: Vec<_> = solvers
            .iter()
            .map(|&solver| {
                let cfg = SolverConfig { solver, ..config.clone() };
                let options = &options;
                s.spawn(move || run_experiment(&cfg, x, y, options))
            })
            .collect();
        solvers.iter().copied().zip(handles.into_iter().map(|h| h.join().expect("solver thread panicked"))).collect()
    })
}

/// Repeats a configuration over seeds concurrently; results keep the seed order.
pub fn run_trials(config: &SolverConfig, seeds: &[u64], x: &DataMatrix, y: &DataMatrix, options: &ExperimentOptions) -> Vec<Result<Experiment>> {
    thread::scope(|s| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let cfg = SolverConfig { seed, ..config.clone() };
                s.spawn(move || run_experiment(&cfg, x, y, options))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("trial thread panicked")).collect()
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ArtifactPaths<'a> {
    pub report: Option<&'a Path>,
    pub trace: Option<&'a Path>,
    pub model: Option<&'a Path>,
}

pub fn write_artifacts(experiment: &Experiment, paths: ArtifactPaths, timing: bool) -> Result<()> {
    if let Some(p) = paths.report {
        io::save_text(p, &experiment.report.to_jsonl(timing))?;
    }
    if let Some(p) = paths.trace {
        io::save_text(p, &experiment.report.flop_pcc_curve())?;
    }
    if let Some(p) = paths.model {
        io::save_model(p, &experiment.model)?;
    }
    Ok(())
}
