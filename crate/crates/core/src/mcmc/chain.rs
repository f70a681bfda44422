use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::calibrate::{calibrate_lambda_prior, Calibration};
use super::config::{LambdaPrior, McmcConfig, Priors, SweepOrder};
use super::updates::{
    sweep_order, update_alpha, update_knots, update_lambda, update_sigma2, update_sigma_a,
    update_theta, MhOutcome,
};
use crate::error::{Result, StgpError};
use crate::model::{Dataset, FieldBasis, KnotScratch, Mode, ModelState, StateParams};
use crate::stats::{derive_seed, quantile_sorted, rng_from_seed, variance};
use crate::threshold::ThresholdLevel;

const THETA_SCALE_RANGE: (f64, f64) = (1e-3, 5.0);
const LAMBDA_SD_RANGE: (f64, f64) = (1e-3, 5.0);
pub(crate) const TAG_CHAIN: u64 = 0xC4A1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Theta,
    Lambda,
}

/// One proposal-sd change made by the burn-in adaptation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptationEvent {
    pub iteration: usize,
    pub block: Block,
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BlockCounts {
    pub proposed: u64,
    pub accepted: u64,
}

impl BlockCounts {
    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Acceptance counts over the retained (post burn-in) iterations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Acceptance {
    pub knots: BlockCounts,
    pub theta: BlockCounts,
    pub lambda: BlockCounts,
}

/// Scalar traces, one entry per retained draw.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Traces {
    pub alpha: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub sigma_a: Vec<f64>,
    pub lambda: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub log_likelihood: Vec<f64>,
}

impl Traces {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    /// Posterior mean of β on the fitted (normalized) scale.
    pub beta_mean: Vec<f64>,
    /// Fraction of retained draws with β_j ≠ 0.
    pub inclusion: Vec<f64>,
    pub alpha_mean: Vec<f64>,
    pub traces: Traces,
    pub acceptance: Acceptance,
    pub adaptation: Vec<AdaptationEvent>,
    pub final_theta_scale: f64,
    pub final_lambda_sd: f64,
    pub lambda_bounds: (f64, f64),
    pub calibration: Option<Calibration>,
    /// Thinned β draws, only when requested in the config.
    pub beta_samples: Vec<Vec<f64>>,
    pub kept: usize,
    pub elapsed: Duration,
}

impl ChainSummary {
    /// Equal in every field except wall-clock time.
    pub fn same_draws(&self, other: &ChainSummary) -> bool {
        let mut a = self.clone();
        a.elapsed = other.elapsed;
        if let (Some(x), Some(y)) = (&mut a.calibration, &other.calibration) {
            x.pilot_elapsed = y.pilot_elapsed;
        }
        a == *other
    }

    /// Equal-tailed credible intervals from the stored β draws.
    pub fn credible_intervals(&self, level: f64) -> Option<Vec<(f64, f64)>> {
        credible_intervals(&self.beta_samples, self.beta_mean.len(), level)
    }

    /// Locations whose posterior inclusion probability exceeds `cutoff`.
    pub fn selected(&self, cutoff: f64) -> Vec<bool> {
        self.inclusion.iter().map(|&f| f > cutoff).collect()
    }
}

pub(crate) fn credible_intervals(
    samples: &[Vec<f64>],
    p: usize,
    level: f64,
) -> Option<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return None;
    }
    let tail = 0.5 * (1.0 - level);
    let mut col = Vec::with_capacity(samples.len());
    Some(
        (0..p)
            .map(|j| {
                col.clear();
                col.extend(samples.iter().map(|s| s[j]));
                col.sort_by(f64::total_cmp);
                (
                    quantile_sorted(&col, tail),
                    quantile_sorted(&col, 1.0 - tail),
                )
            })
            .collect(),
    )
}

/// One chain: owns its state, RNG stream and adaptive proposal scales.
pub struct Sampler<'d> {
    data: &'d Dataset,
    cfg: McmcConfig,
    state: ModelState,
    rng: ChaCha8Rng,
    bounds: (f64, f64),
    theta_scale: f64,
    lambda_sd: f64,
    scratch: KnotScratch,
    order: Vec<usize>,
    iteration: usize,
    acceptance: Acceptance,
    adaptation: Vec<AdaptationEvent>,
}

impl<'d> Sampler<'d> {
    /// Initializes at α = 0, a ~ CAR(ϑ₀), σ_a = 1, σ² = var(y), λ at the
    /// midpoint of `bounds`. Equal bounds pin λ.
    pub fn new(
        data: &'d Dataset,
        basis: &FieldBasis,
        cfg: &McmcConfig,
        bounds: (f64, f64),
    ) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_from_seed(cfg.seed);
        let (car, kernels) = basis.at_theta(cfg.initial_theta)?;
        let a = car.sample(&mut rng);
        let sigma2 = match cfg.mode {
            Mode::Gaussian => {
                let v = variance(data.y().as_slice());
                if v > 0.0 && v.is_finite() {
                    v
                } else {
                    1.0
                }
            }
            Mode::Probit => 1.0,
        };
        let lambda = ThresholdLevel::new(0.5 * (bounds.0 + bounds.1))?;
        let state = ModelState::new(
            data,
            cfg.mode,
            car,
            kernels,
            StateParams {
                alpha: vec![0.0; data.q()],
                a,
                sigma_a: 1.0,
                lambda,
                sigma2,
            },
        )?;
        let ll = state.log_likelihood(data);
        if !ll.is_finite() {
            return Err(StgpError::NonFiniteLikelihood(format!(
                "initial log-likelihood is {ll}"
            )));
        }
        Ok(Sampler {
            data,
            cfg: cfg.clone(),
            state,
            rng,
            bounds,
            theta_scale: cfg.theta_proposal_scale,
            lambda_sd: cfg.lambda_proposal_sd,
            scratch: KnotScratch::default(),
            order: Vec::new(),
            iteration: 0,
            acceptance: Acceptance::default(),
            adaptation: Vec::new(),
        })
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn proposal_sds(&self) -> (f64, f64) {
        (self.theta_scale, self.lambda_sd)
    }

    pub fn adaptation_log(&self) -> &[AdaptationEvent] {
        &self.adaptation
    }

    /// One full Gibbs iteration in the fixed block order.
    pub fn step(&mut self) {
        let burning = self.iteration < self.cfg.burn_in;
        let out = transition(
            &mut self.state,
            self.data,
            &TransitionParams {
                priors: self.cfg.priors,
                bounds: self.bounds,
                theta_scale: self.theta_scale,
                lambda_sd: self.lambda_sd,
                random_sweep: self.cfg.sweep == SweepOrder::Random,
            },
            &mut self.order,
            &mut self.scratch,
            &mut self.rng,
        );
        let (knot_acc, lam, th) = (out.knots_accepted, out.lambda, out.theta);
        if !burning {
            self.acceptance.knots.proposed += self.order.len() as u64;
            self.acceptance.knots.accepted += knot_acc as u64;
            self.acceptance.theta.record(th.accepted);
            if let Some(l) = lam {
                self.acceptance.lambda.record(l.accepted);
            }
        } else if self.cfg.adapt {
            let t = (self.iteration + 1) as f64;
            let gain = self.cfg.adaptation_gain / t.powf(0.6);
            let target = self.cfg.target_acceptance;
            self.theta_scale = adapt(
                self.theta_scale,
                gain * (th.acceptance_prob - target),
                THETA_SCALE_RANGE,
            );
            self.adaptation.push(AdaptationEvent {
                iteration: self.iteration,
                block: Block::Theta,
                sd: self.theta_scale,
            });
            if let Some(l) = lam {
                self.lambda_sd = adapt(
                    self.lambda_sd,
                    gain * (l.acceptance_prob - target),
                    LAMBDA_SD_RANGE,
                );
                self.adaptation.push(AdaptationEvent {
                    iteration: self.iteration,
                    block: Block::Lambda,
                    sd: self.lambda_sd,
                });
            }
        }
        self.iteration += 1;
    }
}

/// Fixed-scale settings for one Gibbs transition.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TransitionParams {
    pub priors: Priors,
    pub bounds: (f64, f64),
    pub theta_scale: f64,
    pub lambda_sd: f64,
    pub random_sweep: bool,
}

pub(crate) struct TransitionOutcome {
    pub knots_accepted: usize,
    pub lambda: Option<MhOutcome>,
    pub theta: MhOutcome,
}

/// [probit: augment] → α → knots → σ_a → λ → ϑ → [gaussian: σ²].
pub(crate) fn transition<R: Rng + ?Sized>(
    st: &mut ModelState,
    data: &Dataset,
    tp: &TransitionParams,
    order: &mut Vec<usize>,
    scratch: &mut KnotScratch,
    rng: &mut R,
) -> TransitionOutcome {
    if st.mode() == Mode::Probit {
        st.probit_augment(data, rng);
    }
    update_alpha(st, data, &tp.priors, rng);
    sweep_order(order, st.a().len(), tp.random_sweep, rng);
    let knots_accepted = update_knots(st, data, order, scratch, rng);
    update_sigma_a(st, data, &tp.priors, rng);
    let lambda = update_lambda(st, data, tp.bounds, tp.lambda_sd, rng);
    let theta = update_theta(st, data, &tp.priors, tp.theta_scale, rng);
    update_sigma2(st, data, &tp.priors, rng);
    TransitionOutcome {
        knots_accepted,
        lambda,
        theta,
    }
}

fn adapt(sd: f64, step: f64, (lo, hi): (f64, f64)) -> f64 {
    (sd.ln() + step).exp().clamp(lo, hi)
}

/// Runs one chain to completion. λ bounds come from the config, or from a
/// λ = 0 pilot chain when calibration is requested.
pub fn run_chain(data: &Dataset, basis: &FieldBasis, cfg: &McmcConfig) -> Result<ChainSummary> {
    cfg.validate()?;
    let (bounds, calibration) = resolve_lambda(data, basis, cfg)?;
    let mut summary = run_with_bounds(data, basis, cfg, bounds)?;
    summary.calibration = calibration;
    Ok(summary)
}

pub(crate) fn resolve_lambda(
    data: &Dataset,
    basis: &FieldBasis,
    cfg: &McmcConfig,
) -> Result<((f64, f64), Option<Calibration>)> {
    Ok(match cfg.lambda_prior {
        LambdaPrior::Fixed { value } => ((value, value), None),
        LambdaPrior::Uniform { lower, upper } => ((lower, upper), None),
        LambdaPrior::Calibrate => {
            let c = calibrate_lambda_prior(data, basis, cfg)?;
            ((c.lower, c.upper), Some(c))
        }
    })
}

/// Runs one chain with explicit λ bounds (equal bounds pin λ).
pub fn run_with_bounds(
    data: &Dataset,
    basis: &FieldBasis,
    cfg: &McmcConfig,
    bounds: (f64, f64),
) -> Result<ChainSummary> {
    let start = Instant::now();
    let mut sampler = Sampler::new(data, basis, cfg, bounds)?;
    let p = data.p();
    let q = data.q();
    let kept = cfg.kept();
    let mut beta_sum = vec![0.0; p];
    let mut nonzero = vec![0u64; p];
    let mut alpha_sum = vec![0.0; q];
    let mut traces = Traces::default();
    let mut beta_samples = Vec::new();
    let mut n_kept = 0usize;
    for it in 0..cfg.iterations {
        sampler.step();
        if it < cfg.burn_in || !(it - cfg.burn_in).is_multiple_of(cfg.thin) {
            continue;
        }
        let st = sampler.state();
        for (j, &b) in st.beta().iter().enumerate() {
            beta_sum[j] += b;
            nonzero[j] += (b != 0.0) as u64;
        }
        for (s, a) in alpha_sum.iter_mut().zip(st.alpha()) {
            *s += a;
        }
        traces.alpha.push(st.alpha().to_vec());
        traces.theta.push(st.theta());
        traces.sigma_a.push(st.sigma_a());
        traces.lambda.push(st.lambda().value());
        traces.sigma2.push(st.sigma2());
        traces.log_likelihood.push(st.log_likelihood(data));
        if cfg.store_beta_samples && n_kept.is_multiple_of(cfg.sample_thin) {
            beta_samples.push(st.beta().to_vec());
        }
        n_kept += 1;
    }
    debug_assert_eq!(n_kept, kept);
    let k = n_kept as f64;
    let (theta_scale, lambda_sd) = sampler.proposal_sds();
    Ok(ChainSummary {
        beta_mean: beta_sum.iter().map(|s| s / k).collect(),
        inclusion: nonzero.iter().map(|&c| c as f64 / k).collect(),
        alpha_mean: alpha_sum.iter().map(|s| s / k).collect(),
        traces,
        acceptance: sampler.acceptance,
        adaptation: sampler.adaptation,
        final_theta_scale: theta_scale,
        final_lambda_sd: lambda_sd,
        lambda_bounds: bounds,
        calibration: None,
        beta_samples,
        kept: n_kept,
        elapsed: start.elapsed(),
    })
}

/// Runs `n_chains` independent chains in parallel with seeds derived from
/// `cfg.seed`. Calibration, if requested, is done once and shared.
pub fn run_chains(
    data: &Dataset,
    basis: &FieldBasis,
    cfg: &McmcConfig,
    n_chains: usize,
) -> Result<Vec<ChainSummary>> {
    cfg.validate()?;
    let (bounds, calibration) = resolve_lambda(data, basis, cfg)?;
    (0..n_chains)
        .into_par_iter()
        .map(|c| {
            let mut chain_cfg = cfg.clone();
            chain_cfg.seed = derive_seed(cfg.seed, TAG_CHAIN, c as u64);
            let mut s = run_with_bounds(data, basis, &chain_cfg, bounds)?;
            s.calibration = calibration.clone();
            Ok(s)
        })
        .collect()
}

/// Pools chains: draw-weighted posterior means and inclusion frequencies,
/// concatenated traces and stored samples, summed acceptance counts.
pub fn merge_summaries(chains: &[ChainSummary]) -> Option<ChainSummary> {
    let first = chains.first()?;
    let total: usize = chains.iter().map(|c| c.kept).sum();
    let weighted = |f: fn(&ChainSummary) -> &Vec<f64>| -> Vec<f64> {
        let mut out = vec![0.0; f(first).len()];
        for c in chains {
            let w = c.kept as f64 / total as f64;
            for (o, v) in out.iter_mut().zip(f(c)) {
                *o += w * v;
            }
        }
        out
    };
    let mut merged = first.clone();
    merged.beta_mean = weighted(|c| &c.beta_mean);
    merged.inclusion = weighted(|c| &c.inclusion);
    merged.alpha_mean = weighted(|c| &c.alpha_mean);
    for c in &chains[1..] {
        let t = &mut merged.traces;
        t.alpha.extend(c.traces.alpha.iter().cloned());
        t.theta.extend(&c.traces.theta);
        t.sigma_a.extend(&c.traces.sigma_a);
        t.lambda.extend(&c.traces.lambda);
        t.sigma2.extend(&c.traces.sigma2);
        t.log_likelihood.extend(&c.traces.log_likelihood);
        merged.beta_samples.extend(c.beta_samples.iter().cloned());
        for (m, o) in [
            (&mut merged.acceptance.knots, &c.acceptance.knots),
            (&mut merged.acceptance.theta, &c.acceptance.theta),
            (&mut merged.acceptance.lambda, &c.acceptance.lambda),
        ] {
            m.proposed += o.proposed;
            m.accepted += o.accepted;
        }
        merged.adaptation.extend(&c.adaptation);
        merged.elapsed = merged.elapsed.max(c.elapsed);
    }
    merged.kept = total;
    Some(merged)
}
