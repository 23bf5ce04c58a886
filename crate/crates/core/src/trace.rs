//! What an iterative runner measures at each recorded iterate.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::matrix::DataMatrix;
use crate::metrics::{tcc, TraceRecord};
use crate::reference::CcaModel;

/// Evaluation targets for a run: always in-sample TCC, plus PCC against an
/// oracle and holdout metrics when supplied. Holdout PCC divides by the
/// oracle's TCC recomputed on the held-out rows.
#[derive(Clone)]
pub struct Evaluation<'a> {
    pub(crate) x: &'a DataMatrix,
    pub(crate) y: &'a DataMatrix,
    pub(crate) oracle: Option<(&'a CcaModel, f64)>,
    holdout: Option<(&'a DataMatrix, &'a DataMatrix, Option<f64>)>,
    /// Record every this many iterations; `None` picks the runner's default.
    pub every: Option<usize>,
    pub timing: bool,
    started: Instant,
}

impl<'a> Evaluation<'a> {
    pub fn new(x: &'a DataMatrix, y: &'a DataMatrix) -> Self {
        Self { x, y, oracle: None, holdout: None, every: None, timing: false, started: Instant::now() }
    }

    pub fn with_oracle(mut self, oracle: &'a CcaModel) -> Result<Self> {
        let value = tcc(self.x, self.y, &oracle.phi, &oracle.psi)?;
        self.oracle = Some((oracle, value));
        Ok(self)
    }

    pub fn with_holdout(mut self, x: &'a DataMatrix, y: &'a DataMatrix, oracle: Option<&CcaModel>) -> Result<Self> {
        let denom = oracle.map(|o| tcc(x, y, &o.phi, &o.psi)).transpose()?;
        self.holdout = Some((x, y, denom));
        Ok(self)
    }

    pub fn every(mut self, every: usize) -> Self {
        self.every = Some(every.max(1));
        self
    }

    pub fn with_timing(mut self, timing: bool) -> Self {
        self.timing = timing;
        self
    }

    pub fn oracle(&self) -> Option<&'a CcaModel> {
        self.oracle.map(|(m, _)| m)
    }

    pub(crate) fn restart_clock(&mut self) {
        self.started = Instant::now();
    }

    pub(crate) fn record(
        &self,
        iteration: usize,
        flops: f64,
        phi: &DMatrix<f64>,
        psi: &DMatrix<f64>,
        error_metric: Option<f64>,
    ) -> Result<TraceRecord> {
        let value = tcc(self.x, self.y, phi, psi)?;
        let pcc = self.oracle.and_then(|(_, d)| (d > 1e-12).then(|| value / d));
        let (tcc_holdout, pcc_holdout) = match self.holdout {
            Some((hx, hy, denom)) => {
                let h = tcc(hx, hy, phi, psi)?;
                (Some(h), denom.and_then(|d| (d > 1e-12).then(|| h / d)))
            }
            None => (None, None),
        };
        Ok(TraceRecord {
            iteration,
            flops,
            wall_seconds: self.timing.then(|| self.started.elapsed().as_secs_f64()),
            tcc: value,
            tcc_holdout,
            pcc,
            pcc_holdout,
            error_metric,
        })
    }
}
