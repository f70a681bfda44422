//! Simulation study: generate replicates of a scenario, fit the thresholded
//! model and its λ = 0 (GP) counterpart, and score both against the truth.

use std::sync::Arc;
use std::time::Duration;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mcmc::{calibrate_with_pilot, run_with_bounds, ChainSummary, LambdaPrior, McmcConfig};
use crate::metrics::{
    coefficient_mse, mean_report, selection_flags, selection_metrics, SelectionReport,
};
use crate::model::{normalize_dataset, Dataset, FieldBasis, NormalizeOptions};
use crate::simdata::{
    generate_replicate, make_true_beta, Covariance, ExpFieldSampler, Replicate, Scenario,
    TrueCoefficient,
};
use crate::spatial::SpatialDomain;
use crate::stats::derive_seed;

const TAG_FIT: u64 = 0xF17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenario: Scenario,
    pub replicates: usize,
    /// Seed for data generation; chain seeds derive from `mcmc.seed`.
    pub seed: u64,
    /// Knot array; defaults to (m/2) x (m/2).
    pub knots: Option<Vec<usize>>,
    pub sigma_h: Option<f64>,
    pub cutoff: f64,
    pub mcmc: McmcConfig,
}

impl StudyConfig {
    pub fn new(scenario: Scenario, replicates: usize) -> Self {
        StudyConfig {
            scenario,
            replicates,
            seed: 1,
            knots: None,
            sigma_h: None,
            cutoff: crate::metrics::DEFAULT_CUTOFF,
            mcmc: McmcConfig::default(),
        }
    }

    pub fn knot_dims(&self) -> Vec<usize> {
        self.knots
            .clone()
            .unwrap_or_else(|| vec![(self.scenario.m / 2).max(2); 2])
    }
}

/// Scores of one replicate on the original coefficient scale.
#[derive(Debug, Clone)]
pub struct ReplicateResult {
    pub index: usize,
    pub stgp: SelectionReport,
    /// MSE of the λ = 0 fit (it selects every location, so only MSE is
    /// meaningful).
    pub gp_mse: f64,
    pub stgp_beta: Vec<f64>,
    pub gp_beta: Vec<f64>,
    pub stgp_summary: ChainSummary,
    pub stgp_elapsed: Duration,
    pub gp_elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub truth: TrueCoefficient,
    pub replicates: Vec<ReplicateResult>,
}

impl StudyResult {
    /// Mean (MSE, Type I %, power %) of the thresholded fit.
    pub fn stgp_means(&self) -> (f64, f64, f64) {
        let reports: Vec<SelectionReport> =
            self.replicates.iter().map(|r| r.stgp.clone()).collect();
        mean_report(&reports).unwrap_or((f64::NAN, f64::NAN, f64::NAN))
    }

    pub fn gp_mean_mse(&self) -> f64 {
        self.replicates.iter().map(|r| r.gp_mse).sum::<f64>() / self.replicates.len() as f64
    }

    pub fn mean_minutes(&self) -> f64 {
        self.replicates
            .iter()
            .map(|r| r.stgp_elapsed.as_secs_f64() / 60.0)
            .sum::<f64>()
            / self.replicates.len() as f64
    }
}

/// Builds the raw dataset (no scalar covariates) of a replicate.
pub fn replicate_dataset(rep: &Replicate, domain: &Arc<SpatialDomain>) -> Result<Dataset> {
    Dataset::new(
        rep.y.clone(),
        DMatrix::zeros(rep.y.len(), 0),
        rep.x.clone(),
        domain.clone(),
    )
}

/// Fits one raw dataset: normalizes it, fits the thresholded model and
/// the GP baseline, and maps both posterior means back to the raw scale.
/// With a calibrated λ prior, the calibration pilot doubles as the GP fit.
pub fn fit_and_score(
    raw: &Dataset,
    basis: &FieldBasis,
    truth: &[f64],
    cfg: &McmcConfig,
    cutoff: f64,
    index: usize,
) -> Result<ReplicateResult> {
    let data = normalize_dataset(raw, cfg.mode, NormalizeOptions::default())?;
    cfg.validate()?;
    let (stgp, gp) = match cfg.lambda_prior {
        LambdaPrior::Calibrate => {
            let (cal, pilot) = calibrate_with_pilot(&data, basis, cfg)?;
            let mut s = run_with_bounds(&data, basis, cfg, (cal.lower, cal.upper))?;
            s.calibration = Some(cal);
            (s, pilot)
        }
        LambdaPrior::Fixed { value } => {
            let s = run_with_bounds(&data, basis, cfg, (value, value))?;
            (s, gp_chain(&data, basis, cfg)?)
        }
        LambdaPrior::Uniform { lower, upper } => {
            let s = run_with_bounds(&data, basis, cfg, (lower, upper))?;
            (s, gp_chain(&data, basis, cfg)?)
        }
    };
    let norm = data.normalization();
    let stgp_beta = norm.beta_to_original(&stgp.beta_mean, true);
    let gp_beta = norm.beta_to_original(&gp.beta_mean, true);
    let flags = selection_flags(&stgp.inclusion, cutoff);
    Ok(ReplicateResult {
        index,
        stgp: selection_metrics(&flags, truth, &stgp_beta)?,
        gp_mse: coefficient_mse(&gp_beta, truth)?,
        stgp_beta,
        gp_beta,
        stgp_elapsed: stgp.elapsed,
        gp_elapsed: gp.elapsed,
        stgp_summary: stgp,
    })
}

fn gp_chain(data: &Dataset, basis: &FieldBasis, cfg: &McmcConfig) -> Result<ChainSummary> {
    let gp = McmcConfig {
        lambda_prior: LambdaPrior::Fixed { value: 0.0 },
        seed: derive_seed(cfg.seed, TAG_FIT, u64::MAX),
        ..cfg.clone()
    };
    run_with_bounds(data, basis, &gp, (0.0, 0.0))
}

/// Runs every replicate (in parallel on the current rayon pool).
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    let sc = cfg.scenario;
    sc.validate()?;
    let truth = make_true_beta(sc.shape, sc.m)?;
    let domain = Arc::new(SpatialDomain::square_grid(sc.m));
    let basis = FieldBasis::new(&domain, &cfg.knot_dims(), cfg.sigma_h)?;
    let sampler = match sc.covariance {
        Covariance::Exp { theta_x } => Some(ExpFieldSampler::new(sc.m, theta_x)?),
        Covariance::Shared { .. } => None,
    };
    let mcmc = McmcConfig {
        mode: sc.mode,
        ..cfg.mcmc.clone()
    };
    let replicates = (0..cfg.replicates)
        .into_par_iter()
        .map(|k| {
            let rep = generate_replicate(&sc, &truth, sampler.as_ref(), cfg.seed, k)?;
            let raw = replicate_dataset(&rep, &domain)?;
            let fit_cfg = McmcConfig {
                seed: derive_seed(mcmc.seed, TAG_FIT, k as u64),
                ..mcmc.clone()
            };
            fit_and_score(&raw, &basis, &truth.beta, &fit_cfg, cfg.cutoff, k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyResult { truth, replicates })
}
