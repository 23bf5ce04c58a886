//! Correlation-capture metrics and run traces.
//!
//! TCC (total correlations captured) of a pair of projections `XA`, `YB` is
//! the sum of the canonical correlations between the two projected blocks.
//! It depends only on the column spans of `XA` and `YB`, so it is computed
//! from orthonormal bases of those spans and needs no regularization. PCC is
//! the ratio of an estimate's TCC to the oracle's TCC on the same rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CcaError, Result};
use crate::matrix::{dense_svd, sym_eigen, DataMatrix};

/// Relative singular-value cutoff below which a projected direction is treated as collapsed.
const RANK_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TccDetail {
    pub value: f64,
    pub correlations: DVector<f64>,
    /// Set when `XA` or `YB` lost rank; the value is then the TCC of the surviving span.
    pub rank_deficient: bool,
}

fn span_basis(p: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let svd = dense_svd(p);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep = svd.singular_values.iter().filter(|&&s| smax > 0.0 && s > RANK_CUTOFF * smax).count();
    (svd.u.columns(0, keep).into_owned(), keep < p.ncols())
}

/// TCC between two already-projected `n x k` blocks.
pub fn projected_tcc(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<TccDetail> {
    if p.nrows() != q.nrows() {
        return Err(CcaError::Dimension(format!("projections have {} and {} rows", p.nrows(), q.nrows())));
    }
    let (up, dp) = span_basis(p);
    let (uq, dq) = span_basis(q);
    if up.ncols() == 0 || uq.ncols() == 0 {
        return Ok(TccDetail { value: 0.0, correlations: DVector::zeros(0), rank_deficient: true });
    }
    let correlations = dense_svd(&up.tr_mul(&uq)).singular_values.map(|c| c.clamp(0.0, 1.0));
    if correlations.iter().any(|c| !c.is_finite()) {
        return Err(CcaError::Numeric("non-finite canonical correlation in TCC".into()));
    }
    Ok(TccDetail { value: correlations.sum(), correlations, rank_deficient: dp || dq })
}

pub fn tcc_detailed(x: &DataMatrix, y: &DataMatrix, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<TccDetail> {
    if x.ncols() != a.nrows() || y.ncols() != b.nrows() {
        return Err(CcaError::Dimension(format!(
            "directions {}x{} / {}x{} do not match views with {} / {} features",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            x.ncols(),
            y.ncols()
        )));
    }
    projected_tcc(&x.mul(a), &y.mul(b))
}

/// Total correlations captured by the direction blocks `a` (for `x`) and `b` (for `y`).
pub fn tcc(x: &DataMatrix, y: &DataMatrix, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    Ok(tcc_detailed(x, y, a, b)?.value)
}

/// Proportion of correlations captured relative to an oracle pair, on the same rows.
pub fn pcc(
    x: &DataMatrix,
    y: &DataMatrix,
    estimate: (&DMatrix<f64>, &DMatrix<f64>),
    oracle: (&DMatrix<f64>, &DMatrix<f64>),
) -> Result<f64> {
    let denom = tcc(x, y, oracle.0, oracle.1)?;
    pcc_with_denominator(x, y, estimate, denom)
}

pub fn pcc_with_denominator(
    x: &DataMatrix,
    y: &DataMatrix,
    estimate: (&DMatrix<f64>, &DMatrix<f64>),
    oracle_tcc: f64,
) -> Result<f64> {
    if !(oracle_tcc > 1e-12) {
        return Err(CcaError::Numeric(format!("oracle captures no correlation (TCC = {oracle_tcc:e})")));
    }
    Ok(tcc(x, y, estimate.0, estimate.1)? / oracle_tcc)
}

fn metric_orthonormalize(a: &DMatrix<f64>, s: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
    let m = match s {
        Some(s) => a.transpose() * s * a,
        None => a.tr_mul(a),
    };
    let mut m = m;
    crate::matrix::symmetrize(&mut m);
    let eig = sym_eigen(&m);
    if !(eig.min() > RANK_CUTOFF * eig.max()) {
        return Err(CcaError::Degenerate("direction block is rank deficient in the given inner product".into()));
    }
    Ok(a * eig.reconstruct_with(|d| 1.0 / d.sqrt()))
}

/// Cosines of the principal angles between `span(a)` and `span(b)` under the
/// inner product `<u, v> = u^T S v` (Euclidean when `s` is `None`), nonincreasing.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>, s: Option<&DMatrix<f64>>) -> Result<DVector<f64>> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(CcaError::Dimension(format!(
            "blocks {}x{} and {}x{} are not comparable",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if let Some(s) = s {
        if s.nrows() != a.nrows() || !s.is_square() {
            return Err(CcaError::Dimension("inner-product matrix does not match the blocks".into()));
        }
    }
    let wa = metric_orthonormalize(a, s)?;
    let wb = metric_orthonormalize(b, s)?;
    let cross = match s {
        Some(s) => wa.transpose() * s * wb,
        None => wa.tr_mul(&wb),
    };
    Ok(dense_svd(&cross).singular_values.map(|c| c.clamp(0.0, 1.0)))
}

/// One evaluated iterate of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    #[serde(rename = "t")]
    pub iteration: usize,
    pub flops: f64,
    #[serde(rename = "wall_s", default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
    pub tcc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tcc_holdout: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pcc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pcc_holdout: Option<f64>,
    #[serde(rename = "e_t", default, skip_serializing_if = "Option::is_none")]
    pub error_metric: Option<f64>,
}

/// Trace of a solver run plus the resolved configuration that produced it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub solver: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub records: Vec<TraceRecord>,
    pub iterations: usize,
    pub converged: bool,
    pub total_flops: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ReportLine {
    Run { solver: String, seed: u64, config: BTreeMap<String, String> },
    Iter(TraceRecord),
    Summary { iterations: usize, converged: bool, total_flops: f64 },
}

impl RunReport {
    pub fn new(solver: impl Into<String>, seed: u64, config: BTreeMap<String, String>) -> Self {
        Self { solver: solver.into(), seed, config, ..Default::default() }
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Pushes a record, enforcing strictly increasing iterations, nondecreasing FLOPs and finite scalars.
    pub fn push(&mut self, record: TraceRecord) -> Result<()> {
        if let Some(prev) = self.records.last() {
            if record.iteration <= prev.iteration || record.flops < prev.flops {
                return Err(CcaError::InvalidInput(format!(
                    "trace record t={} (flops {}) does not follow t={} (flops {})",
                    record.iteration, record.flops, prev.iteration, prev.flops
                )));
            }
        }
        let scalars = [Some(record.flops), record.wall_seconds, Some(record.tcc), record.tcc_holdout, record.pcc, record.pcc_holdout, record.error_metric];
        if scalars.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CcaError::Numeric(format!("non-finite metric in trace record t={}", record.iteration)));
        }
        self.records.push(record);
        Ok(())
    }

    /// First recorded FLOP count at which in-sample PCC reached `target`.
    pub fn flops_to_pcc(&self, target: f64) -> Option<f64> {
        self.records.iter().find(|r| r.pcc.is_some_and(|p| p >= target)).map(|r| r.flops)
    }

    /// Line-delimited JSON: a `run` header, one `iter` line per record, and a `summary` line.
    /// Wall-clock times are written only when `include_timing` is set, so that
    /// reports of identical runs are byte-identical by default.
    pub fn to_jsonl(&self, include_timing: bool) -> String {
        let mut out = String::new();
        let header = ReportLine::Run { solver: self.solver.clone(), seed: self.seed, config: self.config.clone() };
        out.push_str(&serde_json::to_string(&header).expect("report header serializes"));
        out.push('\n');
        for r in &self.records {
            let mut r = r.clone();
            if !include_timing {
                r.wall_seconds = None;
            }
            out.push_str(&serde_json::to_string(&ReportLine::Iter(r)).expect("record serializes"));
            out.push('\n');
        }
        let summary = ReportLine::Summary {
            iterations: self.iterations,
            converged: self.converged,
            total_flops: self.total_flops,
        };
        out.push_str(&serde_json::to_string(&summary).expect("summary serializes"));
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut report = RunReport::default();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: ReportLine = serde_json::from_str(line)
                .map_err(|e| CcaError::Parse { line: i + 1, message: e.to_string() })?;
            match parsed {
                ReportLine::Run { solver, seed, config } => {
                    report.solver = solver;
                    report.seed = seed;
                    report.config = config;
                }
                ReportLine::Iter(r) => report.records.push(r),
                ReportLine::Summary { iterations, converged, total_flops } => {
                    report.iterations = iterations;
                    report.converged = converged;
                    report.total_flops = total_flops;
                }
            }
        }
        Ok(report)
    }

    /// Plot-ready `flops pcc` pairs, one per line, for records that carry a PCC.
    pub fn flop_pcc_curve(&self) -> String {
        let mut out = String::from("# flops pcc\n");
        for r in &self.records {
            if let Some(p) = r.pcc {
                let _ = writeln!(out, "{} {}", r.flops, p);
            }
        }
        out
    }
}
