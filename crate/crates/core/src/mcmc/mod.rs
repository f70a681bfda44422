//! Metropolis-within-Gibbs sampler: block updates, adaptive chain driver,
//! λ-prior calibration and the joint-distribution self-check.

mod calibrate;
mod chain;
mod config;
mod geweke;
mod updates;

pub use calibrate::{
    calibrate_lambda_prior, calibrate_with_pilot, excluding_zero_fraction,
    lambda_bounds_from_fraction, Calibration,
};
pub use chain::{
    merge_summaries, run_chain, run_chains, run_with_bounds, Acceptance, AdaptationEvent, Block,
    BlockCounts, ChainSummary, Sampler, Traces,
};
pub use config::{LambdaPrior, McmcConfig, Priors, SweepOrder};
pub use geweke::{
    batch_means_se, draw_from_prior, geweke_test, GewekeConfig, GewekeReport, MomentCheck,
};
pub use updates::{
    beta_proposal_shapes, lambda_step, theta_candidate, theta_proposal_sd, update_alpha,
    update_knots, update_lambda, update_sigma2, update_sigma_a, update_theta, MhOutcome,
    ThetaCandidate,
};
