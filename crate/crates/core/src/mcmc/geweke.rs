//! Joint-distribution check of the sampler: parameters drawn directly from
//! the prior (marginal–conditional) must have the same moments as the
//! parameters visited by alternating one sampler transition with a fresh
//! response draw (successive–conditional).

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::chain::{transition, TransitionParams};
use super::config::Priors;
use crate::error::{invalid, Result};
use crate::model::{Dataset, FieldBasis, KnotScratch, Mode, ModelState, StateParams};
use crate::stats::{derive_seed, inv_gamma, mean, rng_from_seed, std_normal, variance};
use crate::threshold::ThresholdLevel;

#[derive(Debug, Clone)]
pub struct GewekeConfig {
    pub cycles: usize,
    /// Batches for the batch-means standard error of the dependent chain.
    pub batches: usize,
    pub seed: u64,
    /// The second-moment checks need finite fourth moments: σ² needs an
    /// inverse-gamma shape above 4, and since Var(mean(a)) grows like
    /// 1/(1 − ϑ), the ϑ prior needs a Beta `b` above 2.
    pub priors: Priors,
    pub lambda_bounds: (f64, f64),
    pub theta_scale: f64,
    pub lambda_sd: f64,
}

impl Default for GewekeConfig {
    fn default() -> Self {
        GewekeConfig {
            cycles: 10_000,
            batches: 50,
            seed: 1,
            priors: Priors {
                alpha_variance: 1.0,
                sigma2_shape: 6.0,
                sigma2_scale: 5.0,
                theta_b: 5.0,
                ..Priors::default()
            },
            lambda_bounds: (0.2, 1.2),
            theta_scale: 0.5,
            lambda_sd: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MomentCheck {
    pub name: String,
    pub marginal_mean: f64,
    pub marginal_se: f64,
    pub successive_mean: f64,
    pub successive_se: f64,
    pub z: f64,
}

#[derive(Debug, Clone)]
pub struct GewekeReport {
    pub checks: Vec<MomentCheck>,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.checks.iter().map(|c| c.z.abs()).fold(0.0, f64::max)
    }
}

const STAT_NAMES: [&str; 4] = ["sigma_a", "theta", "mean_a", "sigma2"];

fn statistics(st: &ModelState) -> [f64; 8] {
    let s = [st.sigma_a(), st.theta(), mean(st.a()), st.sigma2()];
    [
        s[0],
        s[1],
        s[2],
        s[3],
        s[0] * s[0],
        s[1] * s[1],
        s[2] * s[2],
        s[3] * s[3],
    ]
}

/// A full Gaussian-mode state drawn from the prior.
pub fn draw_from_prior<R: Rng + ?Sized>(
    data: &Dataset,
    basis: &FieldBasis,
    priors: &Priors,
    lambda_bounds: (f64, f64),
    rng: &mut R,
) -> Result<ModelState> {
    let beta = Beta::new(priors.theta_a, priors.theta_b)
        .map_err(|e| invalid("theta prior", e.to_string()))?;
    let theta = loop {
        let t: f64 = beta.sample(rng);
        if t > 0.0 && t < 1.0 {
            break t;
        }
    };
    let (car, kernels) = basis.at_theta(theta)?;
    let a = car.sample(rng);
    let alpha = (0..data.q())
        .map(|_| priors.alpha_variance.sqrt() * std_normal(rng))
        .collect();
    let sigma_a = (priors.sigma_a_scale * std_normal(rng)).abs();
    let (lo, hi) = lambda_bounds;
    let lambda = if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    };
    let sigma2 = inv_gamma(priors.sigma2_shape, priors.sigma2_scale, rng);
    ModelState::new(
        data,
        Mode::Gaussian,
        car,
        kernels,
        StateParams {
            alpha,
            a,
            sigma_a,
            lambda: ThresholdLevel::new(lambda)?,
            sigma2,
        },
    )
}

fn draw_response<R: Rng + ?Sized>(st: &ModelState, rng: &mut R) -> DVector<f64> {
    let sd = st.sigma2().sqrt();
    DVector::from_iterator(
        st.eta().len(),
        st.eta().iter().map(|e| e + sd * std_normal(rng)),
    )
}

/// Runs both simulators (in parallel) on the design of `template` and
/// compares first and second moments of (σ_a, ϑ, mean(a), σ²).
pub fn geweke_test(
    template: &Dataset,
    basis: &FieldBasis,
    cfg: &GewekeConfig,
) -> Result<GewekeReport> {
    if cfg.cycles < cfg.batches || cfg.batches < 2 {
        return Err(invalid("cycles", "need cycles >= batches >= 2"));
    }
    let (marginal, successive) = rayon::join(
        || marginal_conditional(template, basis, cfg),
        || successive_conditional(template, basis, cfg),
    );
    let (marginal, successive) = (marginal?, successive?);
    let mut checks = Vec::new();
    for k in 0..8 {
        let m: Vec<f64> = marginal.iter().map(|s| s[k]).collect();
        let s: Vec<f64> = successive.iter().map(|s| s[k]).collect();
        let m_se = (variance(&m) / m.len() as f64).sqrt();
        let s_se = batch_means_se(&s, cfg.batches);
        let (mm, sm) = (mean(&m), mean(&s));
        let name = if k < 4 {
            STAT_NAMES[k].to_string()
        } else {
            format!("{}^2", STAT_NAMES[k - 4])
        };
        checks.push(MomentCheck {
            name,
            marginal_mean: mm,
            marginal_se: m_se,
            successive_mean: sm,
            successive_se: s_se,
            z: (mm - sm) / (m_se * m_se + s_se * s_se).sqrt(),
        });
    }
    Ok(GewekeReport { checks })
}

fn marginal_conditional(
    data: &Dataset,
    basis: &FieldBasis,
    cfg: &GewekeConfig,
) -> Result<Vec<[f64; 8]>> {
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 0x6E3E, 0));
    // The statistics only involve parameters, so the response draw that
    // completes each joint sample is not needed.
    (0..cfg.cycles)
        .map(|_| {
            draw_from_prior(data, basis, &cfg.priors, cfg.lambda_bounds, &mut rng)
                .map(|s| statistics(&s))
        })
        .collect()
}

fn successive_conditional(
    template: &Dataset,
    basis: &FieldBasis,
    cfg: &GewekeConfig,
) -> Result<Vec<[f64; 8]>> {
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 0x6E3E, 1));
    let mut data = template.clone();
    let mut st = draw_from_prior(&data, basis, &cfg.priors, cfg.lambda_bounds, &mut rng)?;
    data.replace_response(draw_response(&st, &mut rng))?;
    let tp = TransitionParams {
        priors: cfg.priors,
        bounds: cfg.lambda_bounds,
        theta_scale: cfg.theta_scale,
        lambda_sd: cfg.lambda_sd,
        random_sweep: false,
    };
    let mut order = Vec::new();
    let mut scratch = KnotScratch::default();
    let mut out = Vec::with_capacity(cfg.cycles);
    for _ in 0..cfg.cycles {
        transition(&mut st, &data, &tp, &mut order, &mut scratch, &mut rng);
        data.replace_response(draw_response(&st, &mut rng))?;
        out.push(statistics(&st));
    }
    Ok(out)
}

/// Standard error of the mean from `batches` contiguous batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| mean(&xs[b * size..(b + 1) * size]))
        .collect();
    (variance(&means) / batches as f64).sqrt()
}
