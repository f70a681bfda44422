use std::time::Duration;

use super::chain::{run_with_bounds, ChainSummary};
use super::config::{LambdaPrior, McmcConfig};
use crate::error::Result;
use crate::model::{Dataset, FieldBasis};
use crate::stats::{derive_seed, std_normal_quantile};

/// Floor on `(u − 0.05)/2` that keeps the upper bound finite.
pub const UPPER_FLOOR: f64 = 1e-4;
const TAG_PILOT: u64 = 0x9110;

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// Fraction of locations whose pilot 95% interval excludes zero.
    pub fraction: f64,
    pub lower: f64,
    pub upper: f64,
    pub pilot_elapsed: Duration,
}

/// `λ_l = −Φ⁻¹[(u + 0.05)/2]`, `λ_u = −Φ⁻¹[max((u − 0.05)/2, 1e-4)]`.
/// `λ_l` is clamped at 0 since thresholds are nonnegative.
pub fn lambda_bounds_from_fraction(u: f64) -> (f64, f64) {
    let lower = (-std_normal_quantile(0.5 * (u + 0.05))).max(0.0);
    let upper = (-std_normal_quantile((0.5 * (u - 0.05)).max(UPPER_FLOOR))).max(lower);
    (lower, upper)
}

/// Fraction of locations whose interval lies strictly on one side of zero.
pub fn excluding_zero_fraction(intervals: &[(f64, f64)]) -> f64 {
    let n = intervals
        .iter()
        .filter(|(lo, hi)| *lo > 0.0 || *hi < 0.0)
        .count();
    n as f64 / intervals.len() as f64
}

/// Pilot chain with λ = 0, β draws stored every `sample_thin` iterations,
/// 95% equal-tailed intervals; returns the implied uniform-prior bounds.
pub fn calibrate_lambda_prior(
    data: &Dataset,
    basis: &FieldBasis,
    cfg: &McmcConfig,
) -> Result<Calibration> {
    calibrate_with_pilot(data, basis, cfg).map(|(c, _)| c)
}

/// As [`calibrate_lambda_prior`], also returning the pilot chain (a complete
/// λ = 0 fit, i.e. the plain GP model).
pub fn calibrate_with_pilot(
    data: &Dataset,
    basis: &FieldBasis,
    cfg: &McmcConfig,
) -> Result<(Calibration, ChainSummary)> {
    let pilot = pilot_chain(data, basis, cfg)?;
    let intervals = pilot
        .credible_intervals(0.95)
        .expect("pilot stores β samples");
    let fraction = excluding_zero_fraction(&intervals);
    let (lower, upper) = lambda_bounds_from_fraction(fraction);
    let c = Calibration {
        fraction,
        lower,
        upper,
        pilot_elapsed: pilot.elapsed,
    };
    Ok((c, pilot))
}

pub(crate) fn pilot_chain(
    data: &Dataset,
    basis: &FieldBasis,
    cfg: &McmcConfig,
) -> Result<ChainSummary> {
    let mut pilot = cfg.clone();
    pilot.lambda_prior = LambdaPrior::Fixed { value: 0.0 };
    pilot.store_beta_samples = true;
    pilot.thin = 1;
    pilot.seed = derive_seed(cfg.seed, TAG_PILOT, 0);
    if cfg.pilot_iterations > 0 {
        pilot.iterations = cfg.pilot_iterations;
        pilot.burn_in = cfg.pilot_burn_in;
    }
    run_with_bounds(data, basis, &pilot, (0.0, 0.0))
}
