use rand::Rng;

use super::dataset::{Dataset, Mode};
use crate::error::{invalid, Result, StgpError};
use crate::spatial::{CarStructure, KernelSystem};
use crate::stats::{truncated_normal_nonpositive, truncated_normal_positive};
use crate::threshold::{soft_threshold, ThresholdLevel};

/// Parameter values used to seed a [`ModelState`].
#[derive(Debug, Clone)]
pub struct StateParams {
    pub alpha: Vec<f64>,
    pub a: Vec<f64>,
    pub sigma_a: f64,
    pub lambda: ThresholdLevel,
    pub sigma2: f64,
}

/// Current sampler position plus the derived quantities the updates reuse:
/// `β̃ = K̃a`, `β = σ_a g_λ(β̃)`, `Wα`, `p^{-1/2} Xβ` and `η`.
#[derive(Debug, Clone)]
pub struct ModelState {
    mode: Mode,
    pub(crate) alpha: Vec<f64>,
    pub(crate) a: Vec<f64>,
    pub(crate) sigma_a: f64,
    pub(crate) lambda: ThresholdLevel,
    pub(crate) sigma2: f64,
    pub(crate) z: Vec<f64>,
    pub(crate) car: CarStructure,
    pub(crate) kernels: KernelSystem,
    pub(crate) beta_tilde: Vec<f64>,
    pub(crate) beta: Vec<f64>,
    pub(crate) wa: Vec<f64>,
    pub(crate) xb: Vec<f64>,
    pub(crate) eta: Vec<f64>,
    root_p_inv: f64,
}

/// `β̃ = K̃a` and `β = σ_a g_λ(β̃)`.
pub fn coefficient_field(
    a: &[f64],
    kernels: &KernelSystem,
    lambda: ThresholdLevel,
    sigma_a: f64,
) -> (Vec<f64>, Vec<f64>) {
    let beta_tilde = kernels.standardized().mul_vec(a);
    let beta = threshold_and_scale(&beta_tilde, lambda, sigma_a);
    (beta_tilde, beta)
}

pub(crate) fn threshold_and_scale(
    beta_tilde: &[f64],
    lambda: ThresholdLevel,
    sigma_a: f64,
) -> Vec<f64> {
    beta_tilde
        .iter()
        .map(|&b| sigma_a * soft_threshold(b, lambda))
        .collect()
}

/// `p^{-1/2} X β`, skipping zero coefficients.
pub(crate) fn image_predictor(data: &Dataset, beta: &[f64]) -> Vec<f64> {
    let scale = 1.0 / (data.p() as f64).sqrt();
    let mut out = vec![0.0; data.n()];
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            let c = scale * b;
            for (o, x) in out.iter_mut().zip(data.x_col(j)) {
                *o += c * x;
            }
        }
    }
    out
}

pub(crate) fn covariate_predictor(data: &Dataset, alpha: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; data.n()];
    for (k, &al) in alpha.iter().enumerate() {
        if al != 0.0 {
            for (o, w) in out.iter_mut().zip(data.w().column(k).iter()) {
                *o += al * w;
            }
        }
    }
    out
}

/// Scratch space for a single-knot proposal; reused across the sweep.
#[derive(Debug, Default, Clone)]
pub struct KnotScratch {
    knot: usize,
    a_new: f64,
    touched: Vec<(usize, f64, f64)>,
    d_eta: Vec<f64>,
    changes_beta: bool,
}

impl ModelState {
    pub fn new(
        data: &Dataset,
        mode: Mode,
        car: CarStructure,
        kernels: KernelSystem,
        params: StateParams,
    ) -> Result<Self> {
        data.check_mode(mode)?;
        if params.alpha.len() != data.q() {
            return Err(StgpError::DimensionMismatch {
                context: "alpha",
                expected: data.q(),
                found: params.alpha.len(),
            });
        }
        if params.a.len() != car.len() || kernels.n_knots() != car.len() {
            return Err(StgpError::DimensionMismatch {
                context: "knot coefficients",
                expected: car.len(),
                found: params.a.len(),
            });
        }
        if kernels.n_locations() != data.p() {
            return Err(StgpError::DimensionMismatch {
                context: "kernel rows vs image columns",
                expected: data.p(),
                found: kernels.n_locations(),
            });
        }
        if !(params.sigma_a > 0.0) {
            return Err(invalid("sigma_a", "must be positive"));
        }
        if mode == Mode::Gaussian && !(params.sigma2 > 0.0) {
            return Err(invalid("sigma2", "must be positive"));
        }
        let z = match mode {
            Mode::Gaussian => Vec::new(),
            Mode::Probit => data
                .y()
                .iter()
                .map(|&y| if y == 1.0 { 0.5 } else { -0.5 })
                .collect(),
        };
        let mut state = ModelState {
            mode,
            alpha: params.alpha,
            a: params.a,
            sigma_a: params.sigma_a,
            lambda: params.lambda,
            sigma2: if mode == Mode::Probit {
                1.0
            } else {
                params.sigma2
            },
            z,
            car,
            kernels,
            beta_tilde: Vec::new(),
            beta: Vec::new(),
            wa: Vec::new(),
            xb: Vec::new(),
            eta: Vec::new(),
            root_p_inv: 1.0 / (data.p() as f64).sqrt(),
        };
        state.refresh(data);
        Ok(state)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
    pub fn a(&self) -> &[f64] {
        &self.a
    }
    pub fn theta(&self) -> f64 {
        self.car.theta()
    }
    pub fn sigma_a(&self) -> f64 {
        self.sigma_a
    }
    pub fn lambda(&self) -> ThresholdLevel {
        self.lambda
    }
    /// Residual variance; fixed at 1 in probit mode.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    /// Probit latents (empty in Gaussian mode).
    pub fn z(&self) -> &[f64] {
        &self.z
    }
    pub fn car(&self) -> &CarStructure {
        &self.car
    }
    pub fn kernels(&self) -> &KernelSystem {
        &self.kernels
    }
    pub fn beta_tilde(&self) -> &[f64] {
        &self.beta_tilde
    }
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Working response: `y` for Gaussian data, the latents `z` for probit.
    pub fn response<'a>(&'a self, data: &'a Dataset) -> &'a [f64] {
        match self.mode {
            Mode::Gaussian => data.y().as_slice(),
            Mode::Probit => &self.z,
        }
    }

    /// Recomputes every cache from the parameters.
    pub fn refresh(&mut self, data: &Dataset) {
        let (bt, b) = coefficient_field(&self.a, &self.kernels, self.lambda, self.sigma_a);
        self.beta_tilde = bt;
        self.beta = b;
        self.wa = covariate_predictor(data, &self.alpha);
        self.xb = image_predictor(data, &self.beta);
        self.eta = self.wa.iter().zip(&self.xb).map(|(a, b)| a + b).collect();
    }

    pub(crate) fn refresh_eta(&mut self) {
        for ((e, a), b) in self.eta.iter_mut().zip(&self.wa).zip(&self.xb) {
            *e = a + b;
        }
    }

    /// Largest absolute discrepancy between the caches and a from-scratch
    /// recomputation.
    pub fn audit(&self, data: &Dataset) -> f64 {
        let mut fresh = self.clone();
        fresh.refresh(data);
        let diff = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        diff(&self.beta_tilde, &fresh.beta_tilde)
            .max(diff(&self.beta, &fresh.beta))
            .max(diff(&self.eta, &fresh.eta))
    }

    /// Gaussian log-likelihood of the working response given `η`.
    pub fn log_likelihood(&self, data: &Dataset) -> f64 {
        let resp = self.response(data);
        gaussian_loglik_from(resp, &self.eta, self.sigma2)
    }

    /// Log-likelihood change if `a_l` became `a_new`; the candidate is kept
    /// in `scratch` for [`ModelState::commit_knot`]. Only locations in the
    /// support of knot `l` are touched.
    pub fn propose_knot(
        &self,
        data: &Dataset,
        l: usize,
        a_new: f64,
        scratch: &mut KnotScratch,
    ) -> f64 {
        let n = data.n();
        scratch.knot = l;
        scratch.a_new = a_new;
        scratch.touched.clear();
        scratch.changes_beta = false;
        if scratch.d_eta.len() != n {
            scratch.d_eta = vec![0.0; n];
        } else {
            scratch.d_eta.iter_mut().for_each(|v| *v = 0.0);
        }
        let delta_a = a_new - self.a[l];
        if delta_a == 0.0 {
            return 0.0;
        }
        let (rows, vals) = self.kernels.standardized().col(l);
        for (&j, &k) in rows.iter().zip(vals) {
            let bt = self.beta_tilde[j] + k * delta_a;
            let b = self.sigma_a * soft_threshold(bt, self.lambda);
            scratch.touched.push((j, bt, b));
            let db = b - self.beta[j];
            if db != 0.0 {
                scratch.changes_beta = true;
                let c = db * self.root_p_inv;
                for (d, x) in scratch.d_eta.iter_mut().zip(data.x_col(j)) {
                    *d += c * x;
                }
            }
        }
        if !scratch.changes_beta {
            return 0.0;
        }
        let resp = self.response(data);
        let mut s = 0.0;
        for ((d, r), e) in scratch.d_eta.iter().zip(resp).zip(&self.eta) {
            let res = r - e;
            s += d * d - 2.0 * res * d;
        }
        -0.5 * s / self.sigma2
    }

    pub fn commit_knot(&mut self, scratch: &KnotScratch) {
        self.a[scratch.knot] = scratch.a_new;
        for &(j, bt, b) in &scratch.touched {
            self.beta_tilde[j] = bt;
            self.beta[j] = b;
        }
        if scratch.changes_beta {
            for ((e, x), d) in self
                .eta
                .iter_mut()
                .zip(self.xb.iter_mut())
                .zip(&scratch.d_eta)
            {
                *e += d;
                *x += d;
            }
        }
    }

    /// Resamples probit latents: `z_i ~ N(η_i, 1)` truncated to `(0, ∞)`
    /// when `y_i = 1` and to `(-∞, 0]` when `y_i = 0`.
    pub fn probit_augment<R: Rng + ?Sized>(&mut self, data: &Dataset, rng: &mut R) {
        debug_assert_eq!(self.mode, Mode::Probit);
        for ((z, &eta), &y) in self.z.iter_mut().zip(&self.eta).zip(data.y().iter()) {
            *z = if y == 1.0 {
                truncated_normal_positive(eta, 1.0, rng)
            } else {
                truncated_normal_nonpositive(eta, 1.0, rng)
            };
        }
    }
}

pub(crate) fn gaussian_loglik_from(resp: &[f64], eta: &[f64], sigma2: f64) -> f64 {
    let ssr: f64 = resp.iter().zip(eta).map(|(r, e)| (r - e) * (r - e)).sum();
    let n = resp.len() as f64;
    -0.5 * n * (2.0 * std::f64::consts::PI * sigma2).ln() - 0.5 * ssr / sigma2
}

/// `η = Wα + p^{-1/2} Xβ` recomputed from the state's parameters.
pub fn linear_predictor(state: &ModelState, data: &Dataset) -> Vec<f64> {
    let wa = covariate_predictor(data, state.alpha());
    let xb = image_predictor(data, state.beta());
    wa.iter().zip(&xb).map(|(a, b)| a + b).collect()
}

pub fn gaussian_loglik(state: &ModelState, data: &Dataset) -> f64 {
    state.log_likelihood(data)
}

pub fn loglik_delta_knot(state: &ModelState, data: &Dataset, l: usize, a_new: f64) -> f64 {
    let mut scratch = KnotScratch::default();
    state.propose_knot(data, l, a_new, &mut scratch)
}

pub fn probit_augment<R: Rng + ?Sized>(state: &mut ModelState, data: &Dataset, rng: &mut R) {
    state.probit_augment(data, rng)
}
