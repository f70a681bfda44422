//! Soft thresholding `g_λ(x) = sgn(x)(|x| - λ)₊` and the prior inclusion
//! probability it induces on a unit-variance latent field.

use crate::error::{invalid, Result};
use crate::stats::std_normal_cdf;

/// A nonnegative threshold, in units of the standardized latent field.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
pub struct ThresholdLevel(f64);

impl ThresholdLevel {
    pub const ZERO: ThresholdLevel = ThresholdLevel(0.0);

    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(invalid(
                "lambda",
                format!("must be finite and >= 0, got {lambda}"),
            ));
        }
        Ok(ThresholdLevel(lambda))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }
}

/// Returns 0 when `|x| <= λ` (ties included), else `sgn(x)(|x| - λ)`.
#[inline]
pub fn soft_threshold(x: f64, lambda: ThresholdLevel) -> f64 {
    let l = lambda.0;
    if x.abs() <= l {
        0.0
    } else if x > 0.0 {
        x - l
    } else {
        x + l
    }
}

pub fn soft_threshold_field(xs: &[f64], lambda: ThresholdLevel) -> Vec<f64> {
    xs.iter().map(|&x| soft_threshold(x, lambda)).collect()
}

/// `2Φ(-λ)`: prior probability that a unit-variance latent value survives
/// thresholding.
pub fn prior_inclusion_probability(lambda: ThresholdLevel) -> f64 {
    2.0 * std_normal_cdf(-lambda.0)
}
