//! Synthetic two-view data with known canonical structure.
//!
//! Latent whitened views are built column by column: `x_j = a_j` and
//! `y_j = rho_j a_j + sqrt(1 - rho_j^2) b_j` with all `a`, `b` mutually
//! orthogonal, so pair `j` has correlation `rho_j` and pairs do not mix.
//! Each view is then mixed as `X = X_w diag(scales) R` (R a random rotation or
//! the identity), which leaves the canonical correlations unchanged and sets
//! the conditioning of `S_x`.

use nalgebra::{DMatrix, DVector};

use crate::error::{CcaError, Result};
use crate::matrix::DataMatrix;
use crate::random;
use crate::reference::{spectral_cca, CcaModel};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedParams {
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    /// Planted top correlations, strictly decreasing in (0, 1); their count is `k`.
    pub correlations: Vec<f64>,
    /// Correlations of the following latent pairs, each below the last planted one. Others are 0.
    pub tail: Vec<f64>,
    /// Standard deviation of Gaussian noise added in latent coordinates.
    pub noise: f64,
    /// Per-latent-coordinate scales of each view (empty means all ones).
    pub scales_x: Vec<f64>,
    pub scales_y: Vec<f64>,
    /// Apply a random orthogonal mixing after scaling.
    pub rotate: bool,
    /// Orthonormalize the latent draw so sample correlations equal the planted ones exactly.
    pub exact: bool,
}

impl PlantedParams {
    pub fn new(n: usize, p1: usize, p2: usize, correlations: Vec<f64>) -> Self {
        Self {
            n,
            p1,
            p2,
            correlations,
            tail: Vec::new(),
            noise: 0.0,
            scales_x: Vec::new(),
            scales_y: Vec::new(),
            rotate: true,
            exact: true,
        }
    }

    pub fn k(&self) -> usize {
        self.correlations.len()
    }

    /// Geometric scales from `1` down to `1 / span` for both views.
    pub fn with_geometric_scales(mut self, span: f64) -> Self {
        self.scales_x = geometric(self.p1, span);
        self.scales_y = geometric(self.p2, span);
        self
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(CcaError::InvalidInput(m));
        let k = self.k();
        if k == 0 || k > self.p1.min(self.p2) {
            return fail(format!("need 1 <= k <= min(p1, p2), got k = {k}"));
        }
        if self.correlations.iter().any(|&c| !(c > 0.0 && c < 1.0)) || self.correlations.windows(2).any(|w| w[1] >= w[0]) {
            return fail("planted correlations must be strictly decreasing in (0, 1)".into());
        }
        let last = self.correlations[k - 1];
        if k + self.tail.len() > self.p1.min(self.p2) || self.tail.iter().any(|&c| !(c >= 0.0 && c < last)) {
            return fail(format!("tail correlations must fit in min(p1, p2) and lie in [0, {last})"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return fail(format!("noise must be finite and >= 0, got {}", self.noise));
        }
        for (scales, p, name) in [(&self.scales_x, self.p1, "x"), (&self.scales_y, self.p2, "y")] {
            if !scales.is_empty() && (scales.len() != p || scales.iter().any(|&s| !(s > 0.0 && s.is_finite()))) {
                return fail(format!("{name} scales must be {p} positive values"));
            }
        }
        if self.exact && self.n < self.p1 + self.p2 {
            return fail(format!("exact construction needs n >= p1 + p2 = {}", self.p1 + self.p2));
        }
        if self.n < 2 {
            return fail("need at least two samples".into());
        }
        Ok(())
    }

    /// Latent correlation of pair `j`.
    fn rho(&self, j: usize) -> f64 {
        let k = self.k();
        if j < k {
            self.correlations[j]
        } else {
            self.tail.get(j - k).copied().unwrap_or(0.0)
        }
    }
}

pub fn geometric(p: usize, span: f64) -> Vec<f64> {
    if p <= 1 {
        return vec![1.0; p];
    }
    (0..p).map(|i| span.powf(-(i as f64) / (p - 1) as f64)).collect()
}

#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub x: DataMatrix,
    pub y: DataMatrix,
    /// Directions and correlations planted by construction (exact in the noiseless exact mode).
    pub planted: CcaModel,
    /// Top-`k` spectral solution on the generated data.
    pub empirical: CcaModel,
    pub params: PlantedParams,
    pub seed: u64,
}

fn mixing(r: &mut random::Rng, scales: &[f64], p: usize, rotate: bool) -> DMatrix<f64> {
    let d = if scales.is_empty() { DVector::from_element(p, 1.0) } else { DVector::from_column_slice(scales) };
    let scaled = DMatrix::from_diagonal(&d);
    if rotate {
        scaled * random::random_orthogonal(r, p)
    } else {
        scaled
    }
}

/// Generates a planted instance; identical seeds give bitwise-identical data.
pub fn generate_planted(params: &PlantedParams, seed: u64) -> Result<PlantedInstance> {
    params.validate()?;
    let (n, p1, p2, k) = (params.n, params.p1, params.p2, params.k());
    let mut r = random::rng(seed, random::streams::PLANTED);
    let mut g = random::gaussian_matrix(&mut r, n, p1 + p2);
    if params.exact {
        g = g.qr().q() * (n as f64).sqrt();
    }
    let a = g.columns(0, p1).into_owned();
    let mut yw = g.columns(p1, p2).into_owned();
    for j in 0..p1.min(p2) {
        let rho = params.rho(j);
        if rho > 0.0 {
            let col = a.column(j) * rho + yw.column(j) * (1.0 - rho * rho).sqrt();
            yw.set_column(j, &col);
        }
    }
    let mut xw = a;
    if params.noise > 0.0 {
        xw += random::gaussian_matrix(&mut r, n, p1) * params.noise;
        yw += random::gaussian_matrix(&mut r, n, p2) * params.noise;
    }
    let ax = mixing(&mut r, &params.scales_x, p1, params.rotate);
    let ay = mixing(&mut r, &params.scales_y, p2, params.rotate);
    let x = DataMatrix::dense(&xw * &ax)?;
    let y = DataMatrix::dense(&yw * &ay)?;

    // X phi_j = x_w e_j requires phi_j = A^{-1} e_j.
    let inv = |m: &DMatrix<f64>| m.clone().try_inverse().ok_or_else(|| CcaError::Numeric("singular mixing matrix".into()));
    let shrink = 1.0 / (1.0 + params.noise * params.noise).sqrt();
    let planted = CcaModel {
        phi: inv(&ax)?.columns(0, k) * shrink,
        psi: inv(&ay)?.columns(0, k) * shrink,
        correlations: DVector::from_iterator(k, params.correlations.iter().map(|c| c * shrink * shrink)),
        unwhitened: false,
    };
    let mut planted = planted;
    planted.fix_signs();
    let empirical = spectral_cca(&x, &y, k, 0.0)?;
    Ok(PlantedInstance { x, y, planted, empirical, params: params.clone(), seed })
}
