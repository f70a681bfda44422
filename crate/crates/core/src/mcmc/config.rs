use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::Mode;

/// Prior on the threshold λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LambdaPrior {
    /// λ pinned; `value = 0` is the plain GP model.
    Fixed {
        value: f64,
    },
    Uniform {
        lower: f64,
        upper: f64,
    },
    /// Uniform with bounds taken from a λ = 0 pilot fit.
    Calibrate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SweepOrder {
    #[default]
    Sequential,
    Random,
}

/// Hyperparameters. Defaults: α ~ N(0, 10² I), σ² ~ InvGamma(0.1, 0.1),
/// σ_a ~ HalfNormal(0, 1), ϑ ~ Beta(10, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Priors {
    pub alpha_variance: f64,
    pub sigma2_shape: f64,
    pub sigma2_scale: f64,
    pub sigma_a_scale: f64,
    pub theta_a: f64,
    pub theta_b: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Priors {
            alpha_variance: 100.0,
            sigma2_shape: 0.1,
            sigma2_scale: 0.1,
            sigma_a_scale: 1.0,
            theta_a: 10.0,
            theta_b: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub mode: Mode,
    pub target_acceptance: f64,
    /// ϑ proposals have sd `theta_proposal_scale · (1 − ϑ)`.
    pub theta_proposal_scale: f64,
    pub lambda_proposal_sd: f64,
    /// Robbins–Monro gain `c` in `log sd += c (acc - target) / t^0.6`.
    pub adaptation_gain: f64,
    pub adapt: bool,
    pub lambda_prior: LambdaPrior,
    pub sweep: SweepOrder,
    pub priors: Priors,
    pub initial_theta: f64,
    /// Keep thinned β draws (needed for credible intervals).
    pub store_beta_samples: bool,
    /// Every `sample_thin`-th retained draw is stored when sampling β.
    pub sample_thin: usize,
    /// Iterations of the λ = 0 pilot used by calibration (0 = same as `iterations`).
    pub pilot_iterations: usize,
    pub pilot_burn_in: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 5000,
            burn_in: 1000,
            thin: 1,
            seed: 1,
            mode: Mode::Gaussian,
            target_acceptance: 0.4,
            theta_proposal_scale: 0.2,
            lambda_proposal_sd: 0.1,
            adaptation_gain: 1.0,
            adapt: true,
            lambda_prior: LambdaPrior::Calibrate,
            sweep: SweepOrder::Sequential,
            priors: Priors::default(),
            initial_theta: 0.9,
            store_beta_samples: false,
            sample_thin: 10,
            pilot_iterations: 0,
            pilot_burn_in: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(invalid(
                "burn_in",
                format!(
                    "need burn_in < iterations, got {} >= {}",
                    self.burn_in, self.iterations
                ),
            ));
        }
        if self.thin == 0 || self.sample_thin == 0 {
            return Err(invalid("thin", "must be >= 1"));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(invalid("target_acceptance", "must lie in (0, 1)"));
        }
        if !(self.theta_proposal_scale > 0.0) || !(self.lambda_proposal_sd > 0.0) {
            return Err(invalid("proposal_sd", "must be positive"));
        }
        if !(self.initial_theta > 0.0 && self.initial_theta < 1.0) {
            return Err(invalid("initial_theta", "must lie in (0, 1)"));
        }
        match self.lambda_prior {
            LambdaPrior::Fixed { value } if !(value >= 0.0) => {
                return Err(invalid("lambda_prior", "fixed λ must be >= 0"))
            }
            LambdaPrior::Uniform { lower, upper } if !(lower >= 0.0 && upper >= lower) => {
                return Err(invalid("lambda_prior", "need 0 <= lower <= upper"))
            }
            _ => {}
        }
        let p = &self.priors;
        let positive = [
            p.alpha_variance,
            p.sigma2_shape,
            p.sigma2_scale,
            p.sigma_a_scale,
            p.theta_a,
            p.theta_b,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(invalid("priors", "hyperparameters must be positive"));
        }
        if self.pilot_iterations > 0 && self.pilot_burn_in >= self.pilot_iterations {
            return Err(invalid("pilot_burn_in", "must be < pilot_iterations"));
        }
        Ok(())
    }

    /// Number of retained draws.
    pub fn kept(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }
}
