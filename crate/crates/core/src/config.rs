//! Solver configuration: a flat `key = value` format with typed keys.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{CcaError, Result};
use crate::kernel::KernelSpec;
use crate::stochastic::{SamplingMode, ScheduleKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Spectral,
    Qr,
    Als,
    AppGrad,
    StochasticAppGrad,
    Nw,
    Dw,
    PcaCca,
    KernelAppGrad,
}

impl SolverKind {
    pub const ALL: [SolverKind; 9] = [
        SolverKind::Spectral,
        SolverKind::Qr,
        SolverKind::Als,
        SolverKind::AppGrad,
        SolverKind::StochasticAppGrad,
        SolverKind::Nw,
        SolverKind::Dw,
        SolverKind::PcaCca,
        SolverKind::KernelAppGrad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Spectral => "spectral",
            SolverKind::Qr => "qr",
            SolverKind::Als => "als",
            SolverKind::AppGrad => "appgrad",
            SolverKind::StochasticAppGrad => "stochastic-appgrad",
            SolverKind::Nw => "nw",
            SolverKind::Dw => "dw",
            SolverKind::PcaCca => "pca-cca",
            SolverKind::KernelAppGrad => "kernel-appgrad",
        }
    }

    /// Iterative solvers that run at rank `k + oversample`.
    pub fn is_iterative(self) -> bool {
        matches!(self, SolverKind::AppGrad | SolverKind::StochasticAppGrad | SolverKind::KernelAppGrad)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = CcaError;
    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| CcaError::Config(format!("unknown solver '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub solver: SolverKind,
    pub k: usize,
    pub oversample: usize,
    pub lambda: f64,
    /// Fixed step for both views; `None` selects the default (batch) or cross-validates (stochastic).
    pub eta: Option<f64>,
    pub schedule: ScheduleKind,
    pub batch_size: Option<usize>,
    pub sampling: SamplingMode,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    /// Fraction of rows held out for out-of-sample metrics; 0 disables the split.
    pub holdout: f64,
    pub kernel: Option<KernelSpec>,
    pub kernel_center: bool,
    pub pca_m: Option<usize>,
    pub power_iters: usize,
    pub eval_every: Option<usize>,
    /// Step-size candidates, as multiples of the default step.
    pub cv_grid: Vec<f64>,
    pub cv_budget: usize,
    pub cv_fraction: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            solver: SolverKind::AppGrad,
            k: 20,
            oversample: 0,
            lambda: 0.0,
            eta: None,
            schedule: ScheduleKind::Constant,
            batch_size: None,
            sampling: SamplingMode::WithoutReplacement,
            max_iters: 2000,
            tol: 1e-7,
            seed: 0,
            holdout: 0.0,
            kernel: None,
            kernel_center: false,
            pca_m: None,
            power_iters: crate::matrix::DEFAULT_POWER_ITERS,
            eval_every: None,
            cv_grid: vec![0.125, 0.25, 0.5, 1.0, 2.0],
            cv_budget: 100,
            cv_fraction: 0.1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| CcaError::Config(format!("invalid value '{value}' for '{key}'")))
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "none" | "auto" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn show<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), |v| v.to_string())
}

impl SolverConfig {
    /// Sets one key. Keys accept `_` in place of `-`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        match key.as_str() {
            "solver" => self.solver = value.parse()?,
            "k" => self.k = parse(&key, value)?,
            "oversample" => self.oversample = parse(&key, value)?,
            "lambda" => self.lambda = parse(&key, value)?,
            "eta" => self.eta = optional(&key, value)?,
            "schedule" => self.schedule = value.parse()?,
            "batch-size" => self.batch_size = optional(&key, value)?,
            "sampling" => self.sampling = value.parse()?,
            "max-iters" => self.max_iters = parse(&key, value)?,
            "tol" => self.tol = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "holdout" => self.holdout = parse(&key, value)?,
            "kernel" => {
                self.kernel = match value.trim() {
                    "" | "none" => None,
                    v => Some(v.parse()?),
                }
            }
            "kernel-center" => self.kernel_center = parse(&key, value)?,
            "pca-m" => self.pca_m = optional(&key, value)?,
            "power-iters" => self.power_iters = parse(&key, value)?,
            "eval-every" => self.eval_every = optional(&key, value)?,
            "cv-grid" => {
                self.cv_grid = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse(&key, s))
                    .collect::<Result<_>>()?
            }
            "cv-budget" => self.cv_budget = parse(&key, value)?,
            "cv-fraction" => self.cv_fraction = parse(&key, value)?,
            _ => return Err(CcaError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut config = SolverConfig::default();
        config.apply_kv_str(text)?;
        Ok(config)
    }

    pub fn apply_kv_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CcaError::Parse { line: i + 1, message: format!("expected key = value, got '{line}'") })?;
            self.set(key, value).map_err(|e| CcaError::Parse { line: i + 1, message: e.to_string() })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(CcaError::Config(m));
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if let Some(eta) = self.eta {
            if !(eta >= 0.0 && eta.is_finite()) {
                return fail(format!("eta must be finite and >= 0, got {eta}"));
            }
        }
        if self.batch_size == Some(0) {
            return fail("batch-size must be at least 1".into());
        }
        if !(self.tol >= 0.0) {
            return fail(format!("tol must be >= 0, got {}", self.tol));
        }
        if !(0.0..0.5).contains(&self.holdout) && self.holdout != 0.5 {
            return fail(format!("holdout must be in [0, 0.5], got {}", self.holdout));
        }
        if !(self.cv_fraction > 0.0 && self.cv_fraction <= 0.5) {
            return fail(format!("cv-fraction must be in (0, 0.5], got {}", self.cv_fraction));
        }
        if self.cv_grid.is_empty() || self.cv_grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return fail("cv-grid must be a nonempty list of positive multipliers".into());
        }
        if let Some(m) = self.pca_m {
            if m < self.k {
                return fail(format!("pca-m = {m} is below k = {}", self.k));
            }
        }
        if self.solver == SolverKind::KernelAppGrad && self.kernel.is_none() {
            return fail("kernel-appgrad needs a kernel (linear, rbf:<sigma>, poly:<degree>:<offset>)".into());
        }
        Ok(())
    }

    /// Resolved configuration as ordered key/value pairs, embedded in every report.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let grid: Vec<String> = self.cv_grid.iter().map(|g| g.to_string()).collect();
        [
            ("solver", self.solver.to_string()),
            ("k", self.k.to_string()),
            ("oversample", self.oversample.to_string()),
            ("lambda", self.lambda.to_string()),
            ("eta", show(&self.eta)),
            ("schedule", self.schedule.to_string()),
            ("batch-size", show(&self.batch_size)),
            ("sampling", self.sampling.to_string()),
            ("max-iters", self.max_iters.to_string()),
            ("tol", self.tol.to_string()),
            ("seed", self.seed.to_string()),
            ("holdout", self.holdout.to_string()),
            ("kernel", self.kernel.map_or_else(|| "none".to_string(), |k| k.to_string())),
            ("kernel-center", self.kernel_center.to_string()),
            ("pca-m", show(&self.pca_m)),
            ("power-iters", self.power_iters.to_string()),
            ("eval-every", show(&self.eval_every)),
            ("cv-grid", grid.join(",")),
            ("cv-budget", self.cv_budget.to_string()),
            ("cv-fraction", self.cv_fraction.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn to_kv_string(&self) -> String {
        self.to_map().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
