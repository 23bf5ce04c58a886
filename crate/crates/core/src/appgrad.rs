//! Augmented approximate gradient (AppGrad) for CCA.
//!
//! The state carries an unnormalized pair `(Phi~, Psi~)` that takes plain
//! least-squares gradient steps, and the normalized pair `(Phi, Psi)` obtained
//! from it by whitening the `k x k` Gram `Phi~^T S_x Phi~`. No `p x p` matrix
//! is ever formed.

use nalgebra::DMatrix;

use crate::config::SolverConfig;
use crate::error::{CcaError, Result};
use crate::matrix::{dense_svd, sym_eigen};
use crate::metrics::RunReport;
use crate::problem::{CcaProblem, View};
use crate::random;
use crate::reference::CcaModel;
use crate::trace::Evaluation;

/// Normalization fails when the Gram's condition number exceeds this.
const DEGENERATE_RATIO: f64 = 1e-10;
/// Squared induced norm treated as zero (a norm of 1e-14).
const DEGENERATE_ABS: f64 = 1e-28;
/// Squared induced norm treated as divergence (a norm of 1e6).
const DIVERGED_SQ: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub x: f64,
    pub y: f64,
}

impl StepSizes {
    /// Zero is accepted and freezes the unnormalized state.
    pub fn new(x: f64, y: f64) -> Result<Self> {
        for eta in [x, y] {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(CcaError::InvalidInput(format!("step size must be finite and >= 0, got {eta}")));
            }
        }
        Ok(Self { x, y })
    }

    pub fn uniform(eta: f64) -> Result<Self> {
        Self::new(eta, eta)
    }

    pub fn scaled(self, factor: f64) -> StepSizes {
        StepSizes { x: self.x * factor, y: self.y * factor }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppGradState {
    pub phi: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    pub phi_tilde: DMatrix<f64>,
    pub psi_tilde: DMatrix<f64>,
    pub iteration: usize,
}

impl AppGradState {
    pub fn rank(&self) -> usize {
        self.phi.ncols()
    }

    /// Builds a state from unnormalized blocks by normalizing each.
    pub fn from_tilde(problem: &CcaProblem, phi_tilde: DMatrix<f64>, psi_tilde: DMatrix<f64>) -> Result<Self> {
        if phi_tilde.ncols() != psi_tilde.ncols() {
            return Err(CcaError::Dimension("tilde blocks have different ranks".into()));
        }
        check_shape(problem, View::X, &phi_tilde)?;
        check_shape(problem, View::Y, &psi_tilde)?;
        Ok(Self {
            phi: normalize(problem, View::X, &phi_tilde)?,
            psi: normalize(problem, View::Y, &psi_tilde)?,
            phi_tilde,
            psi_tilde,
            iteration: 0,
        })
    }

    /// Gaussian draw normalized to `Phi^T S_x Phi = I`, with `Phi~ = Phi`.
    pub fn random(problem: &CcaProblem, k: usize, seed: u64) -> Result<Self> {
        let mut r = random::rng(seed, random::streams::INIT);
        let gx = random::gaussian_matrix(&mut r, problem.dim(View::X), k);
        let gy = random::gaussian_matrix(&mut r, problem.dim(View::Y), k);
        let phi = normalize(problem, View::X, &gx)?;
        let psi = normalize(problem, View::Y, &gy)?;
        Ok(Self { phi_tilde: phi.clone(), psi_tilde: psi.clone(), phi, psi, iteration: 0 })
    }

    /// `(Phi, Psi, Phi Lambda, Psi Lambda) Q` for a canonical model; a fixed point of the iteration.
    pub fn at_fixed_point(model: &CcaModel, q: Option<&DMatrix<f64>>) -> Self {
        let lambda = DMatrix::from_diagonal(&model.correlations);
        let mut s = Self {
            phi_tilde: &model.phi * &lambda,
            psi_tilde: &model.psi * &lambda,
            phi: model.phi.clone(),
            psi: model.psi.clone(),
            iteration: 0,
        };
        if let Some(q) = q {
            s.phi = &s.phi * q;
            s.psi = &s.psi * q;
            s.phi_tilde = &s.phi_tilde * q;
            s.psi_tilde = &s.psi_tilde * q;
        }
        s
    }

    /// Frobenius distance between the four blocks of two states.
    pub fn distance(&self, other: &AppGradState) -> f64 {
        ((&self.phi - &other.phi).norm_squared()
            + (&self.psi - &other.psi).norm_squared()
            + (&self.phi_tilde - &other.phi_tilde).norm_squared()
            + (&self.psi_tilde - &other.psi_tilde).norm_squared())
        .sqrt()
    }
}

fn check_shape(problem: &CcaProblem, view: View, block: &DMatrix<f64>) -> Result<()> {
    if block.nrows() != problem.dim(view) {
        return Err(CcaError::Dimension(format!(
            "block has {} rows, view has {} features",
            block.nrows(),
            problem.dim(view)
        )));
    }
    Ok(())
}

/// `tilde (tilde^T S tilde)^{-1/2}`, with the `k x k` Gram formed through `X tilde`.
pub fn normalize(problem: &CcaProblem, view: View, tilde: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let g = problem.projected_gram(view, tilde);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(CcaError::Diverged("non-finite iterate; reduce the step size".into()));
    }
    if g.diagonal().max() > DIVERGED_SQ {
        return Err(CcaError::Diverged(format!(
            "iterate induced norm reached {:e}; reduce the step size",
            g.diagonal().max().sqrt()
        )));
    }
    let eig = sym_eigen(&g);
    if !(eig.max() > DEGENERATE_ABS) || !(eig.min() > DEGENERATE_RATIO * eig.max()) {
        return Err(CcaError::Degenerate(format!(
            "iterate Gram has eigenvalues in [{:e}, {:e}]; restart from a different initialization",
            eig.min(),
            eig.max()
        )));
    }
    Ok(tilde * eig.reconstruct_with(|d| 1.0 / d.sqrt()))
}

/// Rank-1 step. Identical to [`appgrad_step`] with one column; kept as its own entry point.
pub fn appgrad_step_rank1(problem: &CcaProblem, state: &AppGradState, eta: StepSizes) -> Result<AppGradState> {
    if state.rank() != 1 {
        return Err(CcaError::Dimension(format!("rank-1 step given a rank-{} state", state.rank())));
    }
    appgrad_step(problem, state, eta)
}

/// One AppGrad iteration. Both gradient steps read the incoming normalized
/// partners, so the two sides are independent.
pub fn appgrad_step(problem: &CcaProblem, state: &AppGradState, eta: StepSizes) -> Result<AppGradState> {
    check_shape(problem, View::X, &state.phi_tilde)?;
    check_shape(problem, View::Y, &state.psi_tilde)?;
    if state.phi.shape() != state.phi_tilde.shape() || state.psi.shape() != state.psi_tilde.shape() {
        return Err(CcaError::Dimension("normalized and unnormalized blocks differ in shape".into()));
    }
    let gx = problem.gradient(View::X, &state.phi_tilde, &state.psi);
    let gy = problem.gradient(View::Y, &state.psi_tilde, &state.phi);
    let phi_tilde = &state.phi_tilde - gx * eta.x;
    let psi_tilde = &state.psi_tilde - gy * eta.y;
    Ok(AppGradState {
        phi: normalize(problem, View::X, &phi_tilde)?,
        psi: normalize(problem, View::Y, &psi_tilde)?,
        phi_tilde,
        psi_tilde,
        iteration: state.iteration + 1,
    })
}

/// Modeled floating-point cost of one [`appgrad_step`] at rank `k`: four
/// products with each view, the two `k x k` Grams, their eigendecompositions
/// and the rotations back to `p x k`.
pub fn step_flops(problem: &CcaProblem, k: usize) -> f64 {
    let (n, k) = (problem.n() as f64, k as f64);
    let side = |view: View| {
        let p = problem.dim(view) as f64;
        4.0 * problem.product_flops(view, k as usize) + 2.0 * n * k * k + 10.0 * k * k * k + 2.0 * p * k * k + 4.0 * p * k
    };
    side(View::X) + side(View::Y)
}

/// `min_R ||next - prev R||_F` over orthogonal `R`.
pub fn procrustes_distance(prev: &DMatrix<f64>, next: &DMatrix<f64>) -> f64 {
    let svd = dense_svd(&prev.tr_mul(next));
    let r = &svd.u * svd.v.transpose();
    (next - prev * r).norm()
}

/// Rotates a state to diagonalize `Phi^T S_xy Psi` and keeps the `k` largest correlations.
pub fn extract_model(problem: &CcaProblem, phi: &DMatrix<f64>, psi: &DMatrix<f64>, k: usize) -> Result<CcaModel> {
    if k == 0 || k > phi.ncols() {
        return Err(CcaError::Dimension(format!("cannot extract {k} directions from a rank-{} state", phi.ncols())));
    }
    // Iterates normalized on a minibatch are re-whitened on the full data first.
    let phi = &normalize(problem, View::X, phi).unwrap_or_else(|_| phi.clone());
    let psi = &normalize(problem, View::Y, psi).unwrap_or_else(|_| psi.clone());
    let svd = dense_svd(&problem.projected_cross(phi, psi));
    let mut model = CcaModel {
        phi: phi * svd.u.columns(0, k),
        psi: psi * svd.v.columns(0, k),
        correlations: svd.singular_values.rows(0, k).into_owned(),
        unwhitened: false,
    };
    model.fix_signs();
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremStep {
    pub eta: f64,
    pub delta: f64,
    /// Guaranteed per-iteration contraction factor of the error metric.
    pub rate: f64,
}

/// Step size and contraction factor guaranteed for a rank-1 run started with
/// error `e0` inside the region `e0 < 2 (lambda1^2 - lambda2^2) / l1`.
pub fn theoretical_step_size(lambda1: f64, lambda2: f64, l1: f64, l2: f64, e0: f64) -> Result<TheoremStep> {
    if !(lambda1 > lambda2 && lambda2 >= 0.0 && lambda1 <= 1.0) {
        return Err(CcaError::Precondition(format!("need 1 >= lambda1 > lambda2 >= 0, got {lambda1}, {lambda2}")));
    }
    if !(l1 >= 1.0 && l2 >= 1.0 && l1.is_finite() && l2.is_finite()) {
        return Err(CcaError::Precondition(format!("need L1, L2 >= 1, got {l1}, {l2}")));
    }
    let bound = 2.0 * (lambda1 * lambda1 - lambda2 * lambda2) / l1;
    if !(e0 >= 0.0 && e0 < bound) {
        return Err(CcaError::Precondition(format!("initial error {e0} outside the contraction region e0 < {bound}")));
    }
    let inner = 1.0 - (2.0 * (lambda1 * lambda1 - lambda2 * lambda2) - l1 * e0) / (2.0 * lambda1 * lambda1);
    let delta = 1.0 - inner.max(0.0).sqrt();
    Ok(TheoremStep { eta: delta / (6.0 * l1), delta, rate: 1.0 - delta * delta / (6.0 * l1 * l2) })
}

/// `||phi~ - s lambda1 phi1||^2 + ||psi~ - s lambda1 psi1||^2`, minimized over the shared sign `s`.
pub fn error_metric(state: &AppGradState, truth: &CcaModel) -> Result<f64> {
    if state.rank() != 1 || truth.rank() < 1 {
        return Err(CcaError::Dimension("error metric needs a rank-1 state".into()));
    }
    if state.phi_tilde.nrows() != truth.phi.nrows() || state.psi_tilde.nrows() != truth.psi.nrows() {
        return Err(CcaError::Dimension("state and truth dimensions differ".into()));
    }
    let l1 = truth.correlations[0];
    let target_x = truth.phi.column(0) * l1;
    let target_y = truth.psi.column(0) * l1;
    let e = |s: f64| {
        (state.phi_tilde.column(0) - &target_x * s).norm_squared() + (state.psi_tilde.column(0) - &target_y * s).norm_squared()
    };
    Ok(e(1.0).min(e(-1.0)))
}

/// Default step `1 / (2 L)`, with `L` a power-iteration estimate of the larger view's top Gram eigenvalue.
pub fn default_step_sizes(problem: &CcaProblem, seed: u64) -> Result<StepSizes> {
    let l = problem.estimate_smoothness(View::X, 100, seed).max(problem.estimate_smoothness(View::Y, 100, seed));
    if !(l > 0.0 && l.is_finite()) {
        return Err(CcaError::Degenerate("a view has zero covariance".into()));
    }
    StepSizes::uniform(0.5 / l)
}

pub enum Init {
    Random,
    State(AppGradState),
}

fn check_rank(problem: &CcaProblem, k: usize) -> Result<usize> {
    let max = problem.dim(View::X).min(problem.dim(View::Y));
    if k == 0 || k > max {
        return Err(CcaError::Dimension(format!("k = {k} must be in 1..={max}")));
    }
    Ok(max)
}

pub(crate) fn initial_state(problem: &CcaProblem, config: &SolverConfig, init: Init) -> Result<AppGradState> {
    let max = check_rank(problem, config.k)?;
    match init {
        Init::Random => AppGradState::random(problem, (config.k + config.oversample).min(max), config.seed),
        Init::State(s) => {
            check_shape(problem, View::X, &s.phi)?;
            check_shape(problem, View::Y, &s.psi)?;
            if s.rank() < config.k {
                return Err(CcaError::Dimension(format!("initial state has rank {} < k = {}", s.rank(), config.k)));
            }
            Ok(s)
        }
    }
}

/// Drops the weakest direction of a state wider than needed, keeping the best
/// `rank - 1` pairs with tilde blocks at their fixed-point scale. Used when a
/// requested rank exceeds the number of nonzero correlations and the surplus
/// columns of the tilde blocks collapse.
pub(crate) fn shrink_state(problem: &CcaProblem, state: &AppGradState) -> Result<AppGradState> {
    let m = extract_model(problem, &state.phi, &state.psi, state.rank() - 1)?;
    let lambda = DMatrix::from_diagonal(&m.correlations);
    Ok(AppGradState { phi_tilde: &m.phi * &lambda, psi_tilde: &m.psi * &lambda, phi: m.phi, psi: m.psi, iteration: state.iteration })
}

/// Records one trace point for `state`, extracting the best `k` directions first when the state is wider.
pub(crate) fn record_state(
    report: &mut RunReport,
    eval: &Evaluation,
    problem: &CcaProblem,
    state: &AppGradState,
    k: usize,
    flops: f64,
) -> Result<()> {
    let e = match eval.oracle() {
        Some(truth) if state.rank() == 1 => error_metric(state, truth).ok(),
        _ => None,
    };
    let record = if state.rank() > k {
        let m = extract_model(problem, &state.phi, &state.psi, k)?;
        eval.record(state.iteration, flops, &m.phi, &m.psi, e)?
    } else {
        eval.record(state.iteration, flops, &state.phi, &state.psi, e)?
    };
    report.push(record)
}

/// Batch AppGrad at rank `k + oversample`, stopped when the Procrustes-aligned
/// movement of both normalized blocks falls below `config.tol`. If
/// `max_iters` runs out first, the report is flagged unconverged and the
/// iterate with the smallest movement is returned.
pub fn run_appgrad(
    problem: &CcaProblem,
    config: &SolverConfig,
    init: Init,
    eval: &Evaluation,
) -> Result<(CcaModel, RunReport)> {
    let mut state = initial_state(problem, config, init)?;
    let eta = match config.eta {
        Some(e) => StepSizes::uniform(e)?,
        None => default_step_sizes(problem, config.seed)?,
    };
    let mut report = RunReport::new(config.solver.name(), config.seed, config.to_map());
    report.config.insert("eta-resolved".into(), eta.x.to_string());
    let mut eval = eval.clone();
    eval.restart_clock();
    let every = eval.every.unwrap_or(1);
    let mut per_step = step_flops(problem, state.rank());
    let mut flops = 0.0;
    record_state(&mut report, &eval, problem, &state, config.k, flops)?;

    let mut best: Option<(f64, AppGradState)> = None;
    let mut converged = false;
    let mut dropped = 0;
    for t in 1..=config.max_iters {
        let next = match appgrad_step(problem, &state, eta) {
            Err(CcaError::Degenerate(_)) if state.rank() > config.k => {
                state = shrink_state(problem, &state)?;
                per_step = step_flops(problem, state.rank());
                dropped += 1;
                best = None;
                continue;
            }
            other => other?,
        };
        let movement = procrustes_distance(&state.phi, &next.phi).max(procrustes_distance(&state.psi, &next.psi));
        state = next;
        flops += per_step;
        converged = movement < config.tol;
        if best.as_ref().is_none_or(|(m, _)| movement < *m) {
            best = Some((movement, state.clone()));
        }
        if t % every == 0 || converged || t == config.max_iters {
            record_state(&mut report, &eval, problem, &state, config.k, flops)?;
        }
        if converged {
            break;
        }
    }
    report.iterations = state.iteration;
    report.converged = converged;
    report.total_flops = flops;
    if dropped > 0 {
        report.config.insert("rank-dropped".into(), dropped.to_string());
    }
    let final_state = match (converged, best) {
        (false, Some((_, b))) => b,
        _ => state,
    };
    let model = extract_model(problem, &final_state.phi, &final_state.psi, config.k)?;
    Ok((model, report))
}
