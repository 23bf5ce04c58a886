//! Minibatch AppGrad: gradients and the `k x k` whitening both come from `m` sampled rows.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::appgrad::{self, extract_model, initial_state, record_state, shrink_state, step_flops, AppGradState, Init, StepSizes};
use crate::config::{SolverConfig, SolverKind};
use crate::error::{CcaError, Result};
use crate::matrix::DataMatrix;
use crate::metrics::{tcc, RunReport};
use crate::problem::{CcaProblem, View};
use crate::random;
use crate::reference::CcaModel;
use crate::trace::Evaluation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    WithReplacement,
    /// Each epoch is a fresh permutation cut into `floor(n / m)` batches; leftover rows wait for the next epoch.
    WithoutReplacement,
    /// Rows in arrival order, `m` at a time.
    Sequential,
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingMode::WithReplacement => "with-replacement",
            SamplingMode::WithoutReplacement => "without-replacement",
            SamplingMode::Sequential => "sequential",
        })
    }
}

impl FromStr for SamplingMode {
    type Err = CcaError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "with-replacement" => Ok(SamplingMode::WithReplacement),
            "without-replacement" | "epoch" => Ok(SamplingMode::WithoutReplacement),
            "sequential" | "stream" => Ok(SamplingMode::Sequential),
            other => Err(CcaError::Config(format!("unknown sampling mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    Constant,
    /// `eta0 / (1 + t / t0)`
    InverseT { t0: f64 },
    /// `eta0 / sqrt(1 + t / t0)`
    InverseSqrtT { t0: f64 },
}

const DEFAULT_T0: f64 = 100.0;

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleKind::Constant => f.write_str("constant"),
            ScheduleKind::InverseT { t0 } => write!(f, "inverse-t:{t0}"),
            ScheduleKind::InverseSqrtT { t0 } => write!(f, "inverse-sqrt-t:{t0}"),
        }
    }
}

impl FromStr for ScheduleKind {
    type Err = CcaError;
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().splitn(2, ':');
        let name = parts.next().unwrap_or("");
        let t0 = match parts.next() {
            Some(v) => v.trim().parse::<f64>().map_err(|_| CcaError::Config(format!("bad decay offset in '{s}'")))?,
            None => DEFAULT_T0,
        };
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(CcaError::Config(format!("decay offset must be positive in '{s}'")));
        }
        match name {
            "constant" => Ok(ScheduleKind::Constant),
            "inverse-t" => Ok(ScheduleKind::InverseT { t0 }),
            "inverse-sqrt-t" => Ok(ScheduleKind::InverseSqrtT { t0 }),
            _ => Err(CcaError::Config(format!("unknown schedule '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    pub base: StepSizes,
}

impl StepSchedule {
    pub fn constant(base: StepSizes) -> Self {
        Self { kind: ScheduleKind::Constant, base }
    }

    pub fn at(&self, t: usize) -> StepSizes {
        let t = t as f64;
        let factor = match self.kind {
            ScheduleKind::Constant => 1.0,
            ScheduleKind::InverseT { t0 } => 1.0 / (1.0 + t / t0),
            ScheduleKind::InverseSqrtT { t0 } => 1.0 / (1.0 + t / t0).sqrt(),
        };
        self.base.scaled(factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinibatchPlan {
    pub batch_size: usize,
    pub mode: SamplingMode,
    pub seed: u64,
}

impl MinibatchPlan {
    pub fn new(batch_size: usize, mode: SamplingMode, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(CcaError::InvalidInput("batch size must be at least 1".into()));
        }
        Ok(Self { batch_size, mode, seed })
    }

    fn check(&self, n: usize) -> Result<()> {
        let too_big = self.batch_size > n && self.mode != SamplingMode::WithReplacement;
        if self.batch_size == 0 || too_big || n == 0 {
            return Err(CcaError::InvalidInput(format!("batch size {} outside 1..={n}", self.batch_size)));
        }
        Ok(())
    }

    fn epoch_permutation(&self, epoch: usize, n: usize) -> Vec<usize> {
        let mut r = random::rng(random::derive(self.seed, epoch as u64), random::streams::MINIBATCH);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        perm
    }
}

/// Batch size used when none is configured: at least `2k` rows so the sampled Gram is nonsingular.
pub fn default_batch_size(n: usize, k: usize) -> usize {
    (2 * k).max(100).min(n)
}

/// Sorted row indices of batch `t`. Stateless; [`MinibatchSampler`] caches epoch permutations.
pub fn sample_minibatch(plan: &MinibatchPlan, t: usize, n: usize) -> Result<Vec<usize>> {
    MinibatchSampler::new(*plan, n)?.batch(t)
}

pub struct MinibatchSampler {
    plan: MinibatchPlan,
    n: usize,
    epoch: Option<(usize, Vec<usize>)>,
}

impl MinibatchSampler {
    pub fn new(plan: MinibatchPlan, n: usize) -> Result<Self> {
        plan.check(n)?;
        Ok(Self { plan, n, epoch: None })
    }

    pub fn batch(&mut self, t: usize) -> Result<Vec<usize>> {
        let (m, n) = (self.plan.batch_size, self.n);
        let mut idx = match self.plan.mode {
            SamplingMode::WithReplacement => {
                let mut r = random::rng(random::derive(self.plan.seed, t as u64), random::streams::MINIBATCH);
                (0..m).map(|_| r.random_range(0..n)).collect()
            }
            SamplingMode::WithoutReplacement => {
                let per_epoch = n / m;
                let (epoch, slot) = (t / per_epoch, t % per_epoch);
                if self.epoch.as_ref().is_none_or(|(e, _)| *e != epoch) {
                    self.epoch = Some((epoch, self.plan.epoch_permutation(epoch, n)));
                }
                let perm = &self.epoch.as_ref().expect("epoch cached").1;
                perm[slot * m..(slot + 1) * m].to_vec()
            }
            SamplingMode::Sequential => (0..m).map(|j| (t * m + j) % n).collect(),
        };
        idx.sort_unstable();
        Ok(idx)
    }

    /// Replacement batch for iteration `t` after a degenerate draw: `m` distinct rows from an independent stream.
    pub fn resample(&self, t: usize) -> Vec<usize> {
        let mut r = random::rng(random::derive(self.plan.seed, t as u64), random::streams::RESAMPLE);
        let mut idx = rand::seq::index::sample(&mut r, self.n, self.plan.batch_size.min(self.n)).into_vec();
        idx.sort_unstable();
        idx
    }
}

/// Restriction of a problem to a row subset, keeping its regularization.
pub struct Batch {
    x: DataMatrix,
    y: DataMatrix,
    lambda_x: f64,
    lambda_y: f64,
}

impl Batch {
    pub fn select(problem: &CcaProblem, rows: &[usize]) -> Self {
        Self {
            x: problem.x().select_rows(rows),
            y: problem.y().select_rows(rows),
            lambda_x: problem.lambda(View::X),
            lambda_y: problem.lambda(View::Y),
        }
    }

    pub fn problem(&self) -> CcaProblem<'_> {
        CcaProblem::with_view_lambdas(&self.x, &self.y, self.lambda_x, self.lambda_y).expect("rows and lambdas validated upstream")
    }
}

/// One AppGrad step on a sampled problem; the normalization uses the sampled `k x k` Gram.
pub fn stochastic_appgrad_step(batch: &CcaProblem, state: &AppGradState, eta: StepSizes) -> Result<AppGradState> {
    appgrad::appgrad_step(batch, state, eta).map_err(|e| match e {
        CcaError::Degenerate(m) => CcaError::Degenerate(format!("degenerate batch: {m}")),
        other => other,
    })
}

/// Runs `config.max_iters` sampled steps (a single pass over the rows in sequential mode).
/// Records at `t = 0`, every `eval.every` iterations (default: one epoch, `ceil(n / m)`),
/// and at the end. A degenerate batch is redrawn once before the run fails.
pub fn run_stochastic(
    problem: &CcaProblem,
    config: &SolverConfig,
    plan: &MinibatchPlan,
    schedule: &StepSchedule,
    init: Init,
    eval: &Evaluation,
) -> Result<(CcaModel, RunReport)> {
    let n = problem.n();
    let mut sampler = MinibatchSampler::new(*plan, n)?;
    let mut state = initial_state(problem, config, init)?;
    let m = plan.batch_size;
    let total = match plan.mode {
        SamplingMode::Sequential => config.max_iters.min(n / m),
        _ => config.max_iters,
    };
    let mut report = RunReport::new(config.solver.name(), config.seed, config.to_map());
    report.config.insert("batch-size-resolved".into(), m.to_string());
    report.config.insert("eta-resolved".into(), schedule.base.x.to_string());
    let mut eval = eval.clone();
    eval.restart_clock();
    let every = eval.every.unwrap_or(n.div_ceil(m));
    let mut flops = 0.0;
    let mut dropped = 0;
    record_state(&mut report, &eval, problem, &state, config.k, flops)?;

    for t in 0..total {
        let eta = schedule.at(t);
        let batch = Batch::select(problem, &sampler.batch(t)?);
        let (next, cost) = match stochastic_appgrad_step(&batch.problem(), &state, eta) {
            Ok(next) => (next, step_flops(&batch.problem(), state.rank())),
            Err(CcaError::Degenerate(_)) => {
                let retry = Batch::select(problem, &sampler.resample(t));
                match stochastic_appgrad_step(&retry.problem(), &state, eta) {
                    Ok(next) => (next, step_flops(&retry.problem(), state.rank())),
                    Err(CcaError::Degenerate(_)) if state.rank() > config.k => {
                        state = shrink_state(problem, &state)?;
                        dropped += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(e) => return Err(e),
        };
        state = next;
        flops += cost;
        let done = t + 1;
        if done % every == 0 || done == total {
            record_state(&mut report, &eval, problem, &state, config.k, flops)?;
        }
    }
    report.iterations = state.iteration;
    report.total_flops = flops;
    if dropped > 0 {
        report.config.insert("rank-dropped".into(), dropped.to_string());
    }
    let model = extract_model(problem, &state.phi, &state.psi, config.k)?;
    Ok((model, report))
}

fn sampling_plan(config: &SolverConfig, n: usize, rank: usize) -> Result<MinibatchPlan> {
    let m = config.batch_size.unwrap_or_else(|| default_batch_size(n, rank));
    MinibatchPlan::new(m.min(n), config.sampling, config.seed)
}

/// Runs the configured solver (batch or stochastic) at a fixed step, without tracing.
fn short_run(problem: &CcaProblem, config: &SolverConfig, eta: f64) -> Result<CcaModel> {
    let cfg = SolverConfig { eta: Some(eta), max_iters: config.cv_budget, ..config.clone() };
    let eval = Evaluation::new(problem.x(), problem.y()).every(usize::MAX);
    let model = if config.solver == SolverKind::StochasticAppGrad {
        let rank = config.k + config.oversample;
        let plan = sampling_plan(&cfg, problem.n(), rank)?;
        let schedule = StepSchedule { kind: config.schedule, base: StepSizes::uniform(eta)? };
        run_stochastic(problem, &cfg, &plan, &schedule, Init::Random, &eval)?.0
    } else {
        appgrad::run_appgrad(problem, &cfg, Init::Random, &eval)?.0
    };
    Ok(model)
}

/// Picks the step from `grid` whose short run captures the most holdout TCC.
/// Ties go to the smaller step; candidates that fail or diverge are skipped.
pub fn cross_validate_step(problem: &CcaProblem, config: &SolverConfig, grid: &[f64], holdout_fraction: f64) -> Result<StepSizes> {
    if grid.is_empty() || grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(CcaError::InvalidInput("step grid must be a nonempty list of positive values".into()));
    }
    if !(holdout_fraction > 0.0 && holdout_fraction <= 0.5) {
        return Err(CcaError::InvalidInput(format!("holdout fraction must be in (0, 0.5], got {holdout_fraction}")));
    }
    let (train_rows, hold_rows) = random::holdout_split(problem.n(), holdout_fraction, config.seed);
    let train = Batch::select(problem, &train_rows);
    let hold = Batch::select(problem, &hold_rows);
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64)> = None;
    for eta in sorted {
        let Ok(model) = short_run(&train.problem(), config, eta) else {
            continue;
        };
        let Ok(score) = tcc(&hold.x, &hold.y, &model.phi, &model.psi) else {
            continue;
        };
        if score.is_finite() && best.is_none_or(|(s, _)| score > s) {
            best = Some((score, eta));
        }
    }
    let (_, eta) = best.ok_or_else(|| CcaError::Diverged("every step-size candidate failed".into()))?;
    StepSizes::uniform(eta)
}

/// Cross-validates over `config.cv_grid` multiples of the default step.
pub fn tune_step(problem: &CcaProblem, config: &SolverConfig) -> Result<StepSizes> {
    let base = appgrad::default_step_sizes(problem, config.seed)?.x;
    let grid: Vec<f64> = config.cv_grid.iter().map(|g| g * base).collect();
    cross_validate_step(problem, config, &grid, config.cv_fraction)
}

/// Full stochastic pipeline for a configuration: batch size default, tuned or fixed step, schedule.
pub fn run_configured(problem: &CcaProblem, config: &SolverConfig, eval: &Evaluation) -> Result<(CcaModel, RunReport)> {
    let rank = (config.k + config.oversample).min(problem.dim(View::X).min(problem.dim(View::Y)));
    let plan = sampling_plan(config, problem.n(), rank)?;
    let base = match config.eta {
        Some(e) => StepSizes::uniform(e)?,
        None => tune_step(problem, config)?,
    };
    let schedule = StepSchedule { kind: config.schedule, base };
    run_stochastic(problem, config, &plan, &schedule, Init::Random, eval)
}
