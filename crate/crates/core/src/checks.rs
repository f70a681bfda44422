//! Self-checks of the model machinery, each returning a pass/fail outcome
//! with the statistic it was judged on. Shared by the `validate` command and
//! the acceptance tests (which run them at full scale).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::mcmc::{geweke_test, GewekeConfig};
use crate::model::{
    gaussian_loglik, loglik_delta_knot, Dataset, FieldBasis, Mode, ModelState, StateParams,
};
use crate::spatial::{SpatialDomain, WeightRule};
use crate::stats::{derive_seed, rng_from_seed, std_normal};
use crate::threshold::{prior_inclusion_probability, soft_threshold, ThresholdLevel};

const TAG_CHECK: u64 = 0xC8EC;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// The quantity compared against `threshold`.
    pub statistic: f64,
    pub threshold: f64,
    pub detail: String,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {} (statistic {:e}, threshold {:e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.statistic,
            self.threshold
        )
    }
}

fn rng_for(seed: u64, check: u64) -> rand_chacha::ChaCha8Rng {
    rng_from_seed(derive_seed(seed, TAG_CHECK, check))
}

/// A point of `2^-20 Z` in `[lo, hi]`; differences of such points are exact
/// in double precision, so the inequality can be checked without slack.
fn dyadic<R: Rng>(rng: &mut R, lo: i64, hi: i64) -> f64 {
    let scale = (1i64 << 20) as f64;
    rng.random_range(lo * (1 << 20)..=hi * (1 << 20)) as f64 / scale
}

/// `|g(x1) - g(x2)| <= |x1 - x2|` over `triples` random (x1, x2, λ).
pub fn lipschitz_check(triples: usize, seed: u64) -> CheckOutcome {
    let mut rng = rng_for(seed, 1);
    let mut violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..triples {
        let x1 = dyadic(&mut rng, -10, 10);
        let x2 = dyadic(&mut rng, -10, 10);
        let lam = ThresholdLevel::new(dyadic(&mut rng, 0, 5)).expect("nonnegative");
        let excess = (soft_threshold(x1, lam) - soft_threshold(x2, lam)).abs() - (x1 - x2).abs();
        worst = worst.max(excess);
        violations += (excess > 0.0) as usize;
    }
    CheckOutcome {
        name: "lipschitz".into(),
        passed: violations == 0,
        statistic: violations as f64,
        threshold: 0.0,
        detail: format!("{violations} violations in {triples} triples (max excess {worst:e})"),
    }
}

/// Prior variance of every standardized location, computed with a dense
/// inverse of Q, must equal one.
pub fn standardization_check(
    side: usize,
    knots: usize,
    thetas: &[f64],
    rule: WeightRule,
) -> Result<CheckOutcome> {
    let domain = SpatialDomain::square_grid(side);
    let basis = FieldBasis::new(&domain, &[knots, knots], None)?.with_weight_rule(rule);
    let mut worst = 0.0f64;
    for &theta in thetas {
        let (car, ks) = basis.at_theta(theta)?;
        let qinv = car
            .precision_dense()
            .try_inverse()
            .expect("CAR precision is invertible");
        let kt = ks.standardized().to_dense();
        let cov = &kt * qinv * kt.transpose();
        for j in 0..cov.nrows() {
            worst = worst.max((cov[(j, j)] - 1.0).abs());
        }
    }
    Ok(CheckOutcome {
        name: "standardization".into(),
        passed: worst < 1e-6,
        statistic: worst,
        threshold: 1e-6,
        detail: format!(
            "max |Var - 1| over {side}x{side} locations, {knots}x{knots} knots, theta {thetas:?}"
        ),
    })
}

/// Q(ϑ) = M − ϑA is positive definite (dense Cholesky succeeds and the
/// smallest eigenvalue is positive) across a sweep of ϑ.
pub fn car_positive_definite_check(knots: usize) -> Result<CheckOutcome> {
    let domain = SpatialDomain::square_grid(2 * knots);
    let basis = FieldBasis::new(&domain, &[knots, knots], None)?;
    let mut min_eig = f64::INFINITY;
    let mut failures = 0;
    for k in 1..100 {
        let theta = k as f64 / 100.0;
        let q = crate::spatial::car_precision(basis.grid(), theta)?.precision_dense();
        if q.clone().cholesky().is_none() {
            failures += 1;
        }
        min_eig = min_eig.min(q.symmetric_eigenvalues().min());
    }
    Ok(CheckOutcome {
        name: "car_positive_definite".into(),
        passed: failures == 0 && min_eig > 0.0,
        statistic: min_eig,
        threshold: 0.0,
        detail: format!(
            "smallest eigenvalue over theta in 0.01..0.99 ({failures} Cholesky failures)"
        ),
    })
}

/// Nonzero fraction of prior draws of `g_λ(K̃a)` against `2Φ(−λ)`.
pub fn prior_sparsity_check(
    side: usize,
    knots: usize,
    theta: f64,
    lambda: f64,
    draws: usize,
    seed: u64,
    rule: WeightRule,
) -> Result<CheckOutcome> {
    let domain = SpatialDomain::square_grid(side);
    let basis = FieldBasis::new(&domain, &[knots, knots], None)?.with_weight_rule(rule);
    let (car, ks) = basis.at_theta(theta)?;
    let level = ThresholdLevel::new(lambda)?;
    let mut rng = rng_for(seed, 3);
    let fractions: Vec<f64> = (0..draws)
        .map(|_| {
            let a = car.sample(&mut rng);
            let bt = ks.standardized().mul_vec(&a);
            bt.iter()
                .filter(|&&b| soft_threshold(b, level) != 0.0)
                .count() as f64
                / bt.len() as f64
        })
        .collect();
    let m = crate::stats::mean(&fractions);
    let se = (crate::stats::variance(&fractions) / draws as f64).sqrt();
    let target = prior_inclusion_probability(level);
    let z = (m - target).abs() / se;
    Ok(CheckOutcome {
        name: "prior_sparsity".into(),
        passed: z < 3.0,
        statistic: z,
        threshold: 3.0,
        detail: format!(
            "nonzero fraction {m:.5} ± {se:.5} vs 2Φ(−λ) = {target:.5} over {draws} draws"
        ),
    })
}

/// Incremental knot log-likelihood change against full recomputation from a
/// freshly built state, on random states and perturbations.
pub fn delta_likelihood_check(perturbations: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = rng_for(seed, 4);
    let (n, side) = (40, 10);
    let domain = Arc::new(SpatialDomain::square_grid(side));
    let basis = FieldBasis::new(&domain, &[5, 5], None)?;
    let x = DMatrix::from_fn(n, side * side, |_, _| std_normal(&mut rng));
    let w = DMatrix::from_fn(n, 2, |_, k| if k == 0 { 1.0 } else { std_normal(&mut rng) });
    let y = DVector::from_fn(n, |_, _| std_normal(&mut rng));
    let data = Dataset::new(y, w, x, domain)?;
    let mut worst = 0.0f64;
    let mut per_state = 0;
    let mut state: Option<ModelState> = None;
    for _ in 0..perturbations {
        if per_state == 0 {
            let theta = rng.random_range(0.3..0.99);
            let (car, ks) = basis.at_theta(theta)?;
            let a = car.sample(&mut rng);
            state = Some(ModelState::new(
                &data,
                Mode::Gaussian,
                car,
                ks,
                StateParams {
                    alpha: vec![std_normal(&mut rng), std_normal(&mut rng)],
                    a,
                    sigma_a: rng.random_range(0.2..3.0),
                    lambda: ThresholdLevel::new(rng.random_range(0.0..2.0))?,
                    sigma2: rng.random_range(0.2..3.0),
                },
            )?);
            per_state = 50;
        }
        per_state -= 1;
        let st = state.as_ref().expect("initialized above");
        let l = rng.random_range(0..st.a().len());
        let a_new = st.a()[l] + rng.random_range(-2.0..2.0);
        let fast = loglik_delta_knot(st, &data, l, a_new);
        let mut a = st.a().to_vec();
        a[l] = a_new;
        let moved = ModelState::new(
            &data,
            Mode::Gaussian,
            st.car().clone(),
            st.kernels().clone(),
            StateParams {
                alpha: st.alpha().to_vec(),
                a,
                sigma_a: st.sigma_a(),
                lambda: st.lambda(),
                sigma2: st.sigma2(),
            },
        )?;
        let full = gaussian_loglik(&moved, &data) - gaussian_loglik(st, &data);
        worst = worst.max((fast - full).abs() / full.abs().max(1.0));
    }
    Ok(CheckOutcome {
        name: "delta_likelihood".into(),
        passed: worst <= 1e-8,
        statistic: worst,
        threshold: 1e-8,
        detail: format!("max |fast − full| / max(|full|, 1) over {perturbations} perturbations"),
    })
}

/// Joint-distribution test on n = 20, p = 16, L = 4; passes when every
/// moment agrees within `z_max` standard errors.
pub fn geweke_check(cycles: usize, seed: u64, z_max: f64) -> Result<CheckOutcome> {
    let domain = Arc::new(SpatialDomain::square_grid(4));
    let mut rng = rng_for(seed, 5);
    let n = 20;
    let x = DMatrix::from_fn(n, 16, |_, _| std_normal(&mut rng));
    let w = DMatrix::from_element(n, 1, 1.0);
    let data = Dataset::new(DVector::zeros(n), w, x, domain.clone())?;
    let basis = FieldBasis::new(&domain, &[2, 2], None)?;
    let cfg = GewekeConfig {
        cycles,
        batches: 50.min(cycles / 20).max(2),
        seed: derive_seed(seed, TAG_CHECK, 6),
        ..GewekeConfig::default()
    };
    let report = geweke_test(&data, &basis, &cfg)?;
    let worst = report.max_abs_z();
    let detail = report
        .checks
        .iter()
        .map(|c| format!("{} z={:.2}", c.name, c.z))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(CheckOutcome {
        name: "geweke".into(),
        passed: worst < z_max,
        statistic: worst,
        threshold: z_max,
        detail: format!("{cycles} cycles: {detail}"),
    })
}

/// Sizes for [`run_property_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuiteOptions {
    pub seed: u64,
    pub lipschitz_triples: usize,
    pub sparsity_draws: usize,
    pub delta_perturbations: usize,
    pub geweke_cycles: usize,
    /// Fault injection: a rule other than `StdDev` must fail the
    /// standardization and sparsity checks.
    #[serde(skip)]
    pub weight_rule: WeightRule,
}

impl SuiteOptions {
    /// Reduced sizes for a quick release gate.
    pub fn quick(seed: u64) -> Self {
        SuiteOptions {
            seed,
            lipschitz_triples: 100_000,
            sparsity_draws: 500,
            delta_perturbations: 200,
            geweke_cycles: 2_000,
            weight_rule: WeightRule::StdDev,
        }
    }

    pub fn full(seed: u64) -> Self {
        SuiteOptions {
            seed,
            lipschitz_triples: 1_000_000,
            sparsity_draws: 2_000,
            delta_perturbations: 1_000,
            geweke_cycles: 10_000,
            weight_rule: WeightRule::StdDev,
        }
    }
}

pub fn run_property_suite(opts: &SuiteOptions) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        lipschitz_check(opts.lipschitz_triples, opts.seed),
        standardization_check(10, 5, &[0.3, 0.9, 0.99], opts.weight_rule)?,
        car_positive_definite_check(6)?,
        prior_sparsity_check(
            30,
            15,
            0.9,
            1.0,
            opts.sparsity_draws,
            opts.seed,
            opts.weight_rule,
        )?,
        delta_likelihood_check(opts.delta_perturbations, opts.seed)?,
        geweke_check(opts.geweke_cycles, opts.seed, 3.0)?,
    ])
}
