//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails or overruns its time budget.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use cca_core::appgrad::{
    appgrad_step, appgrad_step_rank1, default_step_sizes, error_metric, run_appgrad, theoretical_step_size, AppGradState, Init,
    StepSizes,
};
use cca_core::baselines::{dw_cca, nw_cca, pca_cca, RsvdParams};
use cca_core::harness::{self, generate_planted, io, ArtifactPaths, ExperimentOptions, PlantedParams};
use cca_core::kernel::{kernel_cca, kernel_gram, KernelSpec};
use cca_core::matrix::{sym_eigen, DataMatrix};
use cca_core::metrics::{pcc, principal_angles, tcc};
use cca_core::problem::CcaProblem;
use cca_core::random;
use cca_core::reference::{naive_gradient_step, qr_cca, spectral_cca, CcaModel};
use cca_core::stochastic::{
    run_stochastic, sample_minibatch, stochastic_appgrad_step, Batch, MinibatchPlan, SamplingMode, StepSchedule,
};
use cca_core::{Result, SolverConfig, SolverKind};

type Check = Result<(bool, String)>;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn columns(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    m.columns(0, k).into_owned()
}

fn dense_gram(x: &DataMatrix) -> DMatrix<f64> {
    let d = x.to_dense();
    d.transpose() * &d / x.nrows() as f64
}

/// Views sharing a few strong latent factors on top of Gaussian noise.
fn latent_views(seed: u64, n: usize, p1: usize, p2: usize) -> (DataMatrix, DataMatrix) {
    let mut r = random::rng(seed, 0);
    let strengths = DVector::from_vec(vec![3.0, 2.5, 2.0, 1.5, 1.0]);
    let z = random::gaussian_matrix(&mut r, n, 5) * DMatrix::from_diagonal(&strengths);
    let x = random::gaussian_matrix(&mut r, n, p1) + &z * random::gaussian_matrix(&mut r, 5, p1) * 0.5;
    let y = random::gaussian_matrix(&mut r, n, p2) + &z * random::gaussian_matrix(&mut r, 5, p2) * 0.5;
    (DataMatrix::dense(x).unwrap(), DataMatrix::dense(y).unwrap())
}

fn oracle_agreement() -> Check {
    let (mut corr_err, mut min_cos) = (0.0f64, 1.0f64);
    for i in 0..20u64 {
        let p1 = 10 + (i as usize * 7) % 51;
        let p2 = 8 + (i as usize * 11) % 53;
        let (x, y) = latent_views(1000 + i, 500, p1, p2);
        let k = p1.min(p2);
        let s = spectral_cca(&x, &y, k, 0.0)?;
        let q = qr_cca(&x, &y, k, 0.0)?;
        corr_err = corr_err.max((&s.correlations - &q.correlations).amax());
        for kk in [5, k / 2, k] {
            for (a, b) in [(&s.phi, &q.phi), (&s.psi, &q.psi)] {
                let cos = principal_angles(&columns(a, kk), &columns(b, kk), None)?;
                min_cos = min_cos.min(cos.min());
            }
        }
    }
    Ok((corr_err <= 1e-8 && min_cos >= 1.0 - 1e-6, format!("max correlation gap {corr_err:.2e}, min subspace cosine 1 - {:.2e}", 1.0 - min_cos)))
}

fn fixed_points() -> Check {
    let mut worst = 0.0f64;
    let mut r = random::rng(7, 0);
    for seed in 0..10u64 {
        let mut params = PlantedParams::new(500, 20, 15, vec![0.9, 0.7, 0.5]).with_geometric_scales(10.0);
        params.tail = vec![0.3, 0.2];
        let inst = generate_planted(&params, seed)?;
        let problem = CcaProblem::new(&inst.x, &inst.y, 0.0)?;
        let eta = default_step_sizes(&problem, seed)?;
        let truth = &inst.empirical;
        for i in 0..truth.rank() {
            let pair = CcaModel {
                phi: truth.phi.columns(i, 1).into_owned(),
                psi: truth.psi.columns(i, 1).into_owned(),
                correlations: truth.correlations.rows(i, 1).into_owned(),
                unwhitened: false,
            };
            let s = AppGradState::at_fixed_point(&pair, None);
            worst = worst.max(appgrad_step_rank1(&problem, &s, eta)?.distance(&s));
        }
        for _ in 0..20 {
            let q = random::random_orthogonal(&mut r, truth.rank());
            let s = AppGradState::at_fixed_point(truth, Some(&q));
            worst = worst.max(appgrad_step(&problem, &s, eta)?.distance(&s));
        }
    }
    Ok((worst < 1e-8, format!("largest movement {worst:.2e} over 30 rank-1 pairs and 200 rotations")))
}

fn naive_control() -> Check {
    let mut smallest_move = f64::INFINITY;
    let mut smallest_residual = f64::INFINITY;
    for seed in 0..10u64 {
        // Planted instances have S_x phi_1 parallel to phi_1 by construction, so use latent-factor views.
        let (x, y) = latent_views(100 + seed, 400, 10, 8);
        let problem = CcaProblem::new(&x, &y, 0.0)?;
        let truth = spectral_cca(&x, &y, 1, 0.0)?;
        let phi: DVector<f64> = truth.phi.column(0).into_owned();
        let psi: DVector<f64> = truth.psi.column(0).into_owned();
        let sx = dense_gram(&x);
        let sphi = &sx * &phi;
        let rayleigh = phi.dot(&sphi) / phi.dot(&phi);
        let residual = (&sphi - &phi * rayleigh).norm() / sphi.norm();
        smallest_residual = smallest_residual.min(residual);
        assert!((truth.correlations[0] - 1.0).abs() > 1e-3);
        let (a, b) = naive_gradient_step(&problem, &phi, &psi, 0.1, 0.1)?;
        smallest_move = smallest_move.min(((&a - &phi).norm_squared() + (&b - &psi).norm_squared()).sqrt());
    }
    let pass = smallest_residual > 1e-6 && smallest_move > 1e-6;
    Ok((pass, format!("smallest movement {smallest_move:.2e}, smallest eigenvector residual {smallest_residual:.2e}")))
}

fn theorem_contraction() -> Check {
    let mut params = PlantedParams::new(1000, 8, 8, vec![0.9]).with_geometric_scales(2.0);
    params.tail = vec![0.3];
    let inst = generate_planted(&params, 11)?;
    let problem = CcaProblem::new(&inst.x, &inst.y, 0.0)?;
    let full = spectral_cca(&inst.x, &inst.y, 2, 0.0)?;
    let (l1, l2) = (full.correlations[0], full.correlations[1]);
    let ex = sym_eigen(&dense_gram(&inst.x));
    let ey = sym_eigen(&dense_gram(&inst.y));
    let big_l1 = ex.max().max(ey.max()).max(1.0);
    let big_l2 = (1.0 / ex.min()).max(1.0 / ey.min()).max(1.0);
    let e0 = (l1 * l1 - l2 * l2) / big_l1;
    let step = theoretical_step_size(l1, l2, big_l1, big_l2, e0)?;

    let truth = full.truncate(1);
    let mut r = random::rng(12, 0);
    let dx = random::gaussian_matrix(&mut r, 8, 1);
    let dy = random::gaussian_matrix(&mut r, 8, 1);
    let scale = (e0 / (dx.norm_squared() + dy.norm_squared())).sqrt();
    let mut state = AppGradState::from_tilde(&problem, &truth.phi * l1 + dx * scale, &truth.psi * l1 + dy * scale)?;
    let start = error_metric(&state, &truth)?;
    let eta = StepSizes::uniform(step.eta)?;
    let mut errors = vec![start];
    for _ in 0..500 {
        state = appgrad_step_rank1(&problem, &state, eta)?;
        errors.push(error_metric(&state, &truth)?);
    }
    let bound_ok = errors.iter().enumerate().all(|(t, &e)| e <= step.rate.powi(t as i32) * start * (1.0 + 1e-12));
    let active: Vec<f64> = errors.iter().copied().take_while(|&e| e > 1e-24).collect();
    let decreasing = active.windows(2).all(|w| w[1] < w[0]);
    let slope = (active[active.len() - 1].ln() - active[0].ln()) / (active.len() - 1) as f64;
    Ok((
        bound_ok && decreasing && slope < 0.0 && (start - e0).abs() < 1e-12 * e0.max(1.0),
        format!(
            "L1 {big_l1:.3}, L2 {big_l2:.3}, eta {:.4}, guaranteed rate {:.5}, observed log-rate {slope:.4} over {} steps",
            step.eta,
            step.rate,
            active.len() - 1
        ),
    ))
}

fn batch_accuracy() -> Check {
    let mut pccs = Vec::new();
    for seed in 0..10u64 {
        let mut params = PlantedParams::new(2000, 50, 50, vec![0.95, 0.85, 0.75, 0.65, 0.55]).with_geometric_scales(5.0);
        params.tail = vec![0.45, 0.35, 0.25, 0.15, 0.05];
        let inst = generate_planted(&params, 200 + seed)?;
        let problem = CcaProblem::new(&inst.x, &inst.y, 0.0)?;
        let config = SolverConfig { k: 5, max_iters: 2000, seed, eval_every: Some(2000), ..SolverConfig::default() };
        let eval = cca_core::trace::Evaluation::new(&inst.x, &inst.y).with_oracle(&inst.empirical)?.every(2000);
        let (_, report) = run_appgrad(&problem, &config, Init::Random, &eval)?;
        pccs.push(report.last().and_then(|r| r.pcc).unwrap_or(0.0));
    }
    let worst = pccs.iter().copied().fold(f64::INFINITY, f64::min);
    let hits = pccs.iter().filter(|&&p| p >= 0.99).count();
    Ok((hits == 10, format!("{hits}/10 seeds reach PCC >= 0.99; worst {worst:.5}")))
}

fn stochastic_reduction() -> Check {
    let params = PlantedParams::new(300, 10, 9, vec![0.9, 0.6, 0.3]);
    let inst = generate_planted(&params, 300)?;
    let problem = CcaProblem::new(&inst.x, &inst.y, 0.0)?;
    let eta = default_step_sizes(&problem, 0)?;
    let plan = MinibatchPlan::new(problem.n(), SamplingMode::WithoutReplacement, 5)?;
    let mut batch_state = AppGradState::random(&problem, 3, 1)?;
    let mut sgd_state = batch_state.clone();
    let mut worst = 0.0f64;
    for t in 0..50 {
        batch_state = appgrad_step(&problem, &batch_state, eta)?;
        let rows = sample_minibatch(&plan, t, problem.n())?;
        let batch = Batch::select(&problem, &rows);
        sgd_state = stochastic_appgrad_step(&batch.problem(), &sgd_state, eta)?;
        worst = worst.max(batch_state.distance(&sgd_state));
    }
    Ok((worst <= 1e-12, format!("largest per-iterate gap {worst:.2e}")))
}

fn stochastic_efficiency() -> Check {
    let target = 0.95;
    let mut ratios = Vec::new();
    let mut notes = Vec::new();
    for seed in 0..5u64 {
        let mut params = PlantedParams::new(20000, 100, 100, vec![0.9, 0.8, 0.7, 0.6, 0.5]).with_geometric_scales(3.0);
        params.tail = vec![0.3, 0.2, 0.1];
        let inst = generate_planted(&params, 400 + seed)?;
        let problem = CcaProblem::new(&inst.x, &inst.y, 0.0)?;
        let base = SolverConfig { k: 5, seed, tol: 1e-4, ..SolverConfig::default() };
        let eval = cca_core::trace::Evaluation::new(&inst.x, &inst.y).with_oracle(&inst.empirical)?;
        let (_, batch) = run_appgrad(&problem, &base, Init::Random, &eval)?;
        let step = default_step_sizes(&problem, seed)?;
        let config = SolverConfig { solver: SolverKind::StochasticAppGrad, batch_size: Some(500), max_iters: 800, ..base };
        let plan = MinibatchPlan::new(500, SamplingMode::WithoutReplacement, seed)?;
        let (_, sgd) = run_stochastic(&problem, &config, &plan, &StepSchedule::constant(step), Init::Random, &eval.clone().every(5))?;
        let ratio = match (sgd.flops_to_pcc(target), batch.flops_to_pcc(target)) {
            (Some(s), Some(b)) => s / b,
            _ => f64::INFINITY,
        };
        notes.push(format!("{ratio:.3} ({} batch iterations)", batch.iterations));
        ratios.push(ratio);
    }
    let m = median(ratios);
    Ok((m <= 0.2, format!("median FLOP ratio to PCC {target} = {m:.3} (per seed: {})", notes.join(", "))))
}

fn stochastic_checks() -> Check {
    let (a_ok, a) = stochastic_reduction()?;
    let (b_ok, b) = stochastic_efficiency()?;
    Ok((a_ok && b_ok, format!("(a) {a}; (b) {b}")))
}

/// Signal carried by small-variance latent coordinates; weakly correlated
/// coordinates dominate the variance; the rest is near-null.
fn skewed_params(n: usize, p: usize) -> PlantedParams {
    let k = 5;
    let tail_len = 25;
    let mut scales = vec![0.1; k];
    scales.extend(harness::planted::geometric(tail_len, 1.0 / 0.15));
    scales.extend((0..p - k - tail_len).map(|i| 0.05 * (0.02f64).powf(i as f64 / (p - k - tail_len - 1) as f64)));
    let mut params = PlantedParams::new(n, p, p, vec![0.9, 0.85, 0.8, 0.75, 0.7]);
    params.tail = (0..tail_len).map(|i| 0.3 - 0.25 * i as f64 / (tail_len - 1) as f64).collect();
    params.scales_x = scales.clone();
    params.scales_y = scales;
    params
}

fn baseline_ordering() -> Check {
    let k = 5;
    let (mut ag, mut pca, mut nw, mut dw) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for seed in 0..5u64 {
        let inst = generate_planted(&skewed_params(3000, 60), 500 + seed)?;
        let (x, y, o) = (&inst.x, &inst.y, &inst.empirical);
        let score = |m: &CcaModel| pcc(x, y, (&m.phi, &m.psi), (&o.phi, &o.psi));
        let problem = CcaProblem::new(x, y, 0.0)?;
        let config = SolverConfig { k, seed, eval_every: Some(usize::MAX), ..SolverConfig::default() };
        let eval = cca_core::trace::Evaluation::new(x, y).every(usize::MAX);
        let (model, _) = run_appgrad(&problem, &config, Init::Random, &eval)?;
        let params = RsvdParams { seed, ..RsvdParams::default() };
        ag.push(score(&model)?);
        pca.push(score(&pca_cca(x, y, k, 4 * k, 0.0, params)?)?);
        nw.push(score(&nw_cca(x, y, k, params)?)?);
        dw.push(score(&dw_cca(x, y, k, 0.0, params)?)?);
    }
    let (ag, pca, nw, dw) = (median(ag), median(pca), median(nw), median(dw));
    let pass = ag - pca >= 0.05 && ag - nw >= 0.05 && ag - dw >= 0.05;
    Ok((pass, format!("median PCC appgrad {ag:.4}, pca-cca {pca:.4}, nw {nw:.4}, dw {dw:.4}")))
}

fn lemma_checks() -> Check {
    let mut decom = 0.0f64;
    let mut relationship = 0.0f64;
    for seed in 0..10u64 {
        let (x, y) = latent_views(600 + seed, 200, 6 + seed as usize % 3, 5 + seed as usize % 4);
        let k = x.ncols().min(y.ncols());
        let m = spectral_cca(&x, &y, k, 0.0)?;
        let (sx, sy) = (dense_gram(&x), dense_gram(&y));
        let sxy = x.to_dense().transpose() * y.to_dense() / x.nrows() as f64;
        let rebuilt = &sx * &m.phi * DMatrix::from_diagonal(&m.correlations) * m.psi.transpose() * &sy;
        decom = decom.max((&rebuilt - &sxy).norm() / sxy.norm());
        let xd = x.to_dense();
        let svd = xd.clone().svd(true, true);
        for i in 0..k {
            let target = y.to_dense() * m.psi.column(i);
            let ls = svd.solve(&target, 1e-14).map_err(|e| cca_core::CcaError::Numeric(e.into()))?;
            let expect = m.phi.column(i) * m.correlations[i];
            relationship = relationship.max((&ls - &expect).norm() / expect.norm().max(1e-300));
        }
    }
    let mut curve_violations = 0;
    let mut curve_checked = 0;
    for seed in 0..5u64 {
        let (x, y) = latent_views(700 + seed, 300, 8, 7);
        let problem = CcaProblem::new(&x, &y, 0.0)?;
        let truth = spectral_cca(&x, &y, 1, 0.0)?;
        let l1 = truth.correlations[0];
        let (sx, sy) = (dense_gram(&x), dense_gram(&y));
        let xnorm = |s: &DMatrix<f64>, v: &DMatrix<f64>| (v.transpose() * s * v)[(0, 0)].max(0.0).sqrt();
        let eta = default_step_sizes(&problem, seed)?;
        let mut state = AppGradState::random(&problem, 1, seed)?;
        for _ in 0..200 {
            for (s, phi, tilde, truth_phi) in
                [(&sx, &state.phi, &state.phi_tilde, &truth.phi), (&sy, &state.psi, &state.psi_tilde, &truth.psi)]
            {
                let cos = (phi.transpose() * s * truth_phi)[(0, 0)] / (xnorm(s, phi) * xnorm(s, truth_phi));
                let lhs = xnorm(s, &(phi - truth_phi));
                let rhs = (2.0 / (1.0 + cos)).sqrt() / l1 * xnorm(s, &(tilde - truth_phi * l1));
                curve_checked += 1;
                if lhs > rhs * (1.0 + 1e-10) + 1e-12 {
                    curve_violations += 1;
                }
            }
            state = appgrad_step_rank1(&problem, &state, eta)?;
        }
    }
    let pass = decom <= 1e-8 && relationship <= 1e-8 && curve_violations == 0;
    Ok((
        pass,
        format!(
            "decomposition residual {decom:.2e}, least-squares gap {relationship:.2e}, curve inequality violated {curve_violations}/{curve_checked}"
        ),
    ))
}

fn kernel_checks() -> Check {
    let config = SolverConfig { max_iters: 2000, ..SolverConfig::default() };
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let mut params = PlantedParams::new(150, 5, 4, vec![0.9, 0.6]);
        params.tail = vec![0.2];
        let inst = generate_planted(&params, 800 + seed)?;
        let kx = kernel_gram(&inst.x, KernelSpec::Linear)?;
        let ky = kernel_gram(&inst.y, KernelSpec::Linear)?;
        let out = kernel_cca(&kx, &ky, 2, None, &SolverConfig { seed, ..config.clone() })?;
        let (dx, dy) = (DataMatrix::dense(kx.values().clone())?, DataMatrix::dense(ky.values().clone())?);
        let kernel_tcc = tcc(&dx, &dy, &out.w_x, &out.w_y)?;
        let linear_tcc = inst.empirical.correlations.sum();
        worst = worst.max((kernel_tcc - linear_tcc).abs());
    }

    let n = 200;
    let mut r = random::rng(900, 0);
    let u = random::gaussian_matrix(&mut r, n, 1);
    let noise = random::gaussian_matrix(&mut r, n, 1) * 0.1;
    let x = DataMatrix::dense(u.map(|v| v * 1.5))?;
    let y = DataMatrix::dense(u.map(|v| (3.0 * v).sin()) + noise)?;
    let linear = spectral_cca(&x, &y, 1, 0.0)?.correlations[0];
    let spec = KernelSpec::Rbf { sigma: 1.0 };
    let (kx, ky) = (kernel_gram(&x, spec)?, kernel_gram(&y, spec)?);
    let out = kernel_cca(&kx, &ky, 1, Some(1e-2), &config)?;
    let (dx, dy) = (DataMatrix::dense(kx.values().clone())?, DataMatrix::dense(ky.values().clone())?);
    let rbf = tcc(&dx, &dy, &out.w_x, &out.w_y)?;
    Ok((worst <= 1e-4 && rbf > linear, format!("linear-kernel TCC gap {worst:.2e}; sin-linked pair: RBF {rbf:.4} vs linear {linear:.4}")))
}

fn metric_properties() -> Check {
    let (x, y) = latent_views(1100, 400, 12, 10);
    let mut r = random::rng(1101, 0);
    let a = random::gaussian_matrix(&mut r, 12, 4);
    let b = random::gaussian_matrix(&mut r, 10, 4);
    let base = tcc(&x, &y, &a, &b)?;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let m1 = random::gaussian_matrix(&mut r, 4, 4) + DMatrix::identity(4, 4) * 0.5;
        let m2 = random::gaussian_matrix(&mut r, 4, 4) + DMatrix::identity(4, 4) * 0.5;
        worst = worst.max((tcc(&x, &y, &(&a * m1), &(&b * m2))? - base).abs());
    }
    let oracle = spectral_cca(&x, &y, 4, 0.0)?;
    let self_pcc = pcc(&x, &y, (&oracle.phi, &oracle.psi), (&oracle.phi, &oracle.psi))?;

    let inst = generate_planted(&PlantedParams::new(1000, 15, 12, vec![0.9, 0.7, 0.5]), 1102)?;
    let config = SolverConfig { k: 3, holdout: 0.2, max_iters: 300, ..SolverConfig::default() };
    let exp = harness::run_experiment(&config, &inst.x, &inst.y, &ExperimentOptions::default())?;
    let holdout = exp.report.last().and_then(|r| r.pcc_holdout).unwrap_or(f64::NAN);
    let pass = worst <= 1e-8 && (self_pcc - 1.0).abs() <= 1e-8 && holdout.is_finite();
    Ok((pass, format!("TCC invariance gap {worst:.2e}, PCC(oracle, oracle) - 1 = {:.1e}, holdout PCC {holdout:.4}", self_pcc - 1.0)))
}

fn determinism_and_io() -> Check {
    let dir = tempfile::tempdir().map_err(cca_core::CcaError::Io)?;
    let inst = generate_planted(&PlantedParams::new(400, 10, 8, vec![0.9, 0.6]), 1200)?;
    let mut same = true;
    for solver in [SolverKind::AppGrad, SolverKind::StochasticAppGrad, SolverKind::Nw] {
        let config = SolverConfig { solver, k: 2, max_iters: 100, batch_size: Some(50), seed: 3, ..SolverConfig::default() };
        let mut files = Vec::new();
        for run in 0..2 {
            let exp = harness::run_experiment(&config, &inst.x, &inst.y, &ExperimentOptions::default())?;
            let report = dir.path().join(format!("{solver}-{run}.jsonl"));
            let trace = dir.path().join(format!("{solver}-{run}.trace"));
            let model = dir.path().join(format!("{solver}-{run}.model"));
            harness::write_artifacts(&exp, ArtifactPaths { report: Some(&report), trace: Some(&trace), model: Some(&model) }, false)?;
            files.push([report, trace, model].map(|p| std::fs::read(p).unwrap()));
        }
        same &= files[0] == files[1];
    }

    let mut r = random::rng(1201, 0);
    let dense = DataMatrix::dense(random::gaussian_matrix(&mut r, 30, 7) * 123.456)?;
    let triplets: Vec<_> = (0..40).map(|i| ((i * 7) % 25, (i * 3) % 9, (i as f64 + 0.5).sqrt() * 1e-3)).collect();
    let sparse = DataMatrix::sparse(25, 9, &triplets)?;
    let mut worst = 0.0f64;
    for (name, m) in [("dense", &dense), ("sparse", &sparse)] {
        let probe = random::gaussian_matrix(&mut r, m.ncols(), 3);
        for ext in ["csv", "mtx"] {
            let path = dir.path().join(format!("{name}.{ext}"));
            io::save_dataset(&path, m, None)?;
            let back = io::load_dataset(&path, None)?;
            let scale = m.mul(&probe).amax().max(1e-300);
            worst = worst.max((back.mul(&probe) - m.mul(&probe)).amax() / scale);
        }
    }
    Ok((same && worst <= 1e-12, format!("reports identical: {same}; worst round-trip product error {worst:.1e}")))
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Check); 11] = [
        ("oracle agreement", 10, oracle_agreement),
        ("fixed points", 30, fixed_points),
        ("naive gradient negative control", 10, naive_control),
        ("contraction bound", 30, theorem_contraction),
        ("batch accuracy", 120, batch_accuracy),
        ("stochastic reduction and efficiency", 300, stochastic_checks),
        ("baseline ordering", 120, baseline_ordering),
        ("lemma numerics", 30, lemma_checks),
        ("kernel equivalence", 60, kernel_checks),
        ("metric properties", 30, metric_properties),
        ("determinism and I/O", 10, determinism_and_io),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let (pass, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        let late = if in_time { String::new() } else { format!(" over the {budget}s budget") };
        println!("[{verdict}] {id:>2} {name} ({:.1}s{late}): {detail}", elapsed.as_secs_f64());
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}
