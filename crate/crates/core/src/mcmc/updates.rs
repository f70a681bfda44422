//! Single-block updates. Each one leaves the state's caches consistent.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::config::Priors;
use crate::model::{
    gaussian_loglik_from, image_predictor, threshold_and_scale, Dataset, KnotScratch, Mode,
    ModelState,
};
use crate::spatial::{CarStructure, KernelSystem};
use crate::stats::{beta_ln_pdf, inv_gamma, std_normal, truncated_normal_positive};
use crate::threshold::{soft_threshold, ThresholdLevel};

/// Result of one Metropolis–Hastings step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhOutcome {
    pub accepted: bool,
    /// `min(1, ratio)`; 0 for candidates outside the support.
    pub acceptance_prob: f64,
}

impl MhOutcome {
    const REJECTED: MhOutcome = MhOutcome {
        accepted: false,
        acceptance_prob: 0.0,
    };
}

fn mh_decide<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> MhOutcome {
    if log_ratio.is_nan() {
        return MhOutcome::REJECTED;
    }
    if log_ratio >= 0.0 {
        return MhOutcome {
            accepted: true,
            acceptance_prob: 1.0,
        };
    }
    let u: f64 = rng.random();
    MhOutcome {
        accepted: u.ln() < log_ratio,
        acceptance_prob: log_ratio.exp(),
    }
}

/// Conjugate draw `α ~ N(m, V)`, `V = (WᵀW/σ² + I/τ²)^{-1}`, `m = V Wᵀ r / σ²`
/// with `r = response − p^{-1/2} Xβ`. No-op when `q = 0`.
pub fn update_alpha<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &Dataset,
    priors: &Priors,
    rng: &mut R,
) {
    let q = data.q();
    if q == 0 {
        return;
    }
    let s2 = state.sigma2;
    let resp = state.response(data);
    let r = DVector::from_iterator(data.n(), resp.iter().zip(&state.xb).map(|(y, xb)| y - xb));
    let w = data.w();
    let mut prec: DMatrix<f64> = w.tr_mul(w) / s2;
    for k in 0..q {
        prec[(k, k)] += 1.0 / priors.alpha_variance;
    }
    let rhs = w.tr_mul(&r) / s2;
    let chol = prec.cholesky().expect("WᵀW/σ² + I/τ² is positive definite");
    let mean = chol.solve(&rhs);
    let z = DVector::from_fn(q, |_, _| std_normal(rng));
    let dev = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .expect("triangular factor is nonsingular");
    state.alpha = (mean + dev).as_slice().to_vec();
    state.wa = crate::model::covariate_predictor(data, &state.alpha);
    state.refresh_eta();
}

/// `σ² ~ InvGamma(a₀ + n/2, b₀ + SSR/2)`. Skipped in probit mode.
pub fn update_sigma2<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &Dataset,
    priors: &Priors,
    rng: &mut R,
) {
    if state.mode() == Mode::Probit {
        return;
    }
    let ssr: f64 = data
        .y()
        .iter()
        .zip(&state.eta)
        .map(|(y, e)| (y - e) * (y - e))
        .sum();
    let n = data.n() as f64;
    state.sigma2 = inv_gamma(
        priors.sigma2_shape + 0.5 * n,
        priors.sigma2_scale + 0.5 * ssr,
        rng,
    );
}

/// Truncated-normal conditional of `σ_a`: the linear predictor is
/// `Wα + σ_a d` with `d = p^{-1/2} X g_λ(β̃)`.
pub fn update_sigma_a<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &Dataset,
    priors: &Priors,
    rng: &mut R,
) {
    let g: Vec<f64> = state
        .beta_tilde
        .iter()
        .map(|&b| soft_threshold(b, state.lambda))
        .collect();
    let d = image_predictor(data, &g);
    let s2 = state.sigma2;
    let resp = state.response(data);
    let (mut dd, mut dr) = (0.0, 0.0);
    for ((di, y), wa) in d.iter().zip(resp).zip(&state.wa) {
        dd += di * di;
        dr += di * (y - wa);
    }
    let tau2 = priors.sigma_a_scale * priors.sigma_a_scale;
    let v = 1.0 / (dd / s2 + 1.0 / tau2);
    let m = v * dr / s2;
    let sa = truncated_normal_positive(m, v.sqrt(), rng);
    state.sigma_a = sa;
    state.beta = g.iter().map(|gj| sa * gj).collect();
    state.xb = d.iter().map(|dj| sa * dj).collect();
    state.refresh_eta();
}

/// Random-walk step on λ within `[lower, upper]`. Returns `None` when the
/// bounds coincide (λ fixed).
pub fn update_lambda<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &Dataset,
    bounds: (f64, f64),
    proposal_sd: f64,
    rng: &mut R,
) -> Option<MhOutcome> {
    let (lo, hi) = bounds;
    if !(hi > lo) {
        return None;
    }
    let cand = state.lambda.value() + proposal_sd * std_normal(rng);
    if !(cand >= lo && cand <= hi) {
        return Some(MhOutcome::REJECTED);
    }
    let level = ThresholdLevel::new(cand).expect("bounds are nonnegative");
    Some(lambda_step(state, data, level, rng))
}

/// MH accept/reject of a specific λ candidate (inside the bounds).
pub fn lambda_step<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &Dataset,
    level: ThresholdLevel,
    rng: &mut R,
) -> MhOutcome {
    let beta = threshold_and_scale(&state.beta_tilde, level, state.sigma_a);
    let xb = image_predictor(data, &beta);
    let eta: Vec<f64> = state.wa.iter().zip(&xb).map(|(a, b)| a + b).collect();
    let resp = state.response(data);
    let log_ratio = gaussian_loglik_from(resp, &eta, state.sigma2)
        - gaussian_loglik_from(resp, &state.eta, state.sigma2);
    let out = mh_decide(log_ratio, rng);
    if out.accepted {
        state.lambda = level;
        state.beta = beta;
        state.xb = xb;
        state.eta = eta;
    }
    out
}

/// Beta shapes with the given mean and sd. When the sd is infeasible for the
/// mean the concentration is raised so that both shapes are at least 0.01.
pub fn beta_proposal_shapes(mean: f64, sd: f64) -> (f64, f64) {
    let floor = 0.01 / mean.min(1.0 - mean);
    let k = (mean * (1.0 - mean) / (sd * sd) - 1.0).max(floor);
    (mean * k, (1.0 - mean) * k)
}

/// Proposal sd for ϑ at the current value: `scale · (1 − ϑ)`. The
/// likelihood's sensitivity to ϑ grows like `1/(1 − ϑ)`, so a relative scale
/// keeps the acceptance rate stable as the chain moves.
pub fn theta_proposal_sd(theta: f64, scale: f64) -> f64 {
    scale * (1.0 - theta)
}

/// Log density of the ϑ proposal centred at `from`, evaluated at `to`.
fn theta_proposal_ln_density(to: f64, from: f64, scale: f64) -> f64 {
    let (a, b) = beta_proposal_shapes(from, theta_proposal_sd(from, scale));
    beta_ln_pdf(to, a, b)
}

/// Everything that changes if ϑ moves to a candidate value.
pub struct ThetaCandidate {
    pub theta: f64,
    car: CarStructure,
    kernels: KernelSystem,
    beta_tilde: Vec<f64>,
    beta: Vec<f64>,
    xb: Vec<f64>,
    eta: Vec<f64>,
    /// Log MH ratio including the proposal correction.
    pub log_ratio: f64,
}

/// Builds the candidate state for ϑ* and its log acceptance ratio. `None`
/// if ϑ* is outside (0, 1) or Q(ϑ*) cannot be factored.
pub fn theta_candidate(
    state: &ModelState,
    data: &Dataset,
    priors: &Priors,
    candidate: f64,
    proposal_scale: f64,
) -> Option<ThetaCandidate> {
    if !(candidate > 0.0 && candidate < 1.0) {
        return None;
    }
    let car = state.car.with_theta(candidate).ok()?;
    let kernels = state.kernels.restandardize(&car).ok()?;
    let beta_tilde = kernels.standardized().mul_vec(&state.a);
    let beta = threshold_and_scale(&beta_tilde, state.lambda, state.sigma_a);
    let xb = image_predictor(data, &beta);
    let eta: Vec<f64> = state.wa.iter().zip(&xb).map(|(a, b)| a + b).collect();
    let resp = state.response(data);
    let cur = state.car.theta();
    let log_lik = gaussian_loglik_from(resp, &eta, state.sigma2)
        - gaussian_loglik_from(resp, &state.eta, state.sigma2);
    let log_car = car.log_density(&state.a) - state.car.log_density(&state.a);
    let log_prior = beta_ln_pdf(candidate, priors.theta_a, priors.theta_b)
        - beta_ln_pdf(cur, priors.theta_a, priors.theta_b);
    let log_q = theta_proposal_ln_density(cur, candidate, proposal_scale)
        - theta_proposal_ln_density(candidate, cur, proposal_scale);
    Some(ThetaCandidate {
        theta: candidate,
        car,
        kernels,
        beta_tilde,
        beta,
        xb,
        eta,
        log_ratio: log_lik + log_car + log_prior + log_q,
    })
}

/// Beta-proposal MH step on ϑ (mean = current value, sd from
/// [`theta_proposal_sd`]); on acceptance the kernels are re-standardized
/// under the new CAR precision.
pub fn update_theta<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &Dataset,
    priors: &Priors,
    proposal_scale: f64,
    rng: &mut R,
) -> MhOutcome {
    let cur = state.car.theta();
    let (a, b) = beta_proposal_shapes(cur, theta_proposal_sd(cur, proposal_scale));
    let cand = match Beta::new(a, b) {
        Ok(d) => d.sample(rng),
        Err(_) => return MhOutcome::REJECTED,
    };
    let Some(c) = theta_candidate(state, data, priors, cand, proposal_scale) else {
        return MhOutcome::REJECTED;
    };
    let out = mh_decide(c.log_ratio, rng);
    if out.accepted {
        state.car = c.car;
        state.kernels = c.kernels;
        state.beta_tilde = c.beta_tilde;
        state.beta = c.beta;
        state.xb = c.xb;
        state.eta = c.eta;
    }
    out
}

/// One sweep over the knots with the CAR full conditional as proposal;
/// returns the number of accepted moves.
pub fn update_knots<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &Dataset,
    order: &[usize],
    scratch: &mut KnotScratch,
    rng: &mut R,
) -> usize {
    let mut accepted = 0;
    for &l in order {
        let (m, v) = state.car.conditional(&state.a, l);
        let cand = m + v.sqrt() * std_normal(rng);
        let delta = state.propose_knot(data, l, cand, scratch);
        if mh_decide(delta, rng).accepted {
            state.commit_knot(scratch);
            accepted += 1;
        }
    }
    accepted
}

/// Fills `order` with the knot visiting order for one sweep.
pub fn sweep_order<R: Rng + ?Sized>(
    order: &mut Vec<usize>,
    n_knots: usize,
    random: bool,
    rng: &mut R,
) {
    order.clear();
    order.extend(0..n_knots);
    if random {
        order.shuffle(rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dataset, FieldBasis, StateParams};
    use crate::spatial::SpatialDomain;
    use crate::stats::{mean, rng_from_seed, variance};
    use nalgebra::{DMatrix, DVector};
    use std::sync::Arc;

    fn toy(n: usize, m: usize, knots: usize, seed: u64, q: usize) -> (Dataset, FieldBasis) {
        let domain = Arc::new(SpatialDomain::square_grid(m));
        let mut rng = rng_from_seed(seed);
        let x = DMatrix::from_fn(n, m * m, |_, _| std_normal(&mut rng));
        let y = DVector::from_fn(n, |_, _| std_normal(&mut rng));
        let w = DMatrix::from_fn(n, q, |_, k| if k == 0 { 1.0 } else { std_normal(&mut rng) });
        let data = Dataset::new(y, w, x, domain.clone()).unwrap();
        let basis = FieldBasis::new(&domain, &[knots, knots], None).unwrap();
        (data, basis)
    }

    fn state_for(
        data: &Dataset,
        basis: &FieldBasis,
        theta: f64,
        lambda: f64,
        seed: u64,
    ) -> ModelState {
        let (car, ks) = basis.at_theta(theta).unwrap();
        let mut rng = rng_from_seed(seed);
        let a = car.sample(&mut rng);
        ModelState::new(
            data,
            Mode::Gaussian,
            car,
            ks,
            StateParams {
                alpha: vec![0.0; data.q()],
                a,
                sigma_a: 1.0,
                lambda: ThresholdLevel::new(lambda).unwrap(),
                sigma2: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn alpha_conjugate_example() {
        // q = 1, W = 1, β = 0, σ² = 1, n = 100, Σy = 50.
        let n = 100;
        let domain = Arc::new(SpatialDomain::square_grid(3));
        let y = DVector::from_fn(n, |i, _| if i < 50 { 1.0 } else { 0.0 });
        let data = Dataset::new(
            y,
            DMatrix::from_element(n, 1, 1.0),
            DMatrix::zeros(n, 9),
            domain.clone(),
        )
        .unwrap();
        let basis = FieldBasis::new(&domain, &[2, 2], None).unwrap();
        let mut st = state_for(&data, &basis, 0.5, 0.0, 1);
        let priors = Priors::default();
        let mut rng = rng_from_seed(2);
        let draws: Vec<f64> = (0..20_000)
            .map(|_| {
                update_alpha(&mut st, &data, &priors, &mut rng);
                st.alpha()[0]
            })
            .collect();
        let m = 50.0 / 100.01;
        let v = 1.0 / 100.01;
        let se = (v / draws.len() as f64).sqrt();
        assert!((mean(&draws) - m).abs() < 4.0 * se);
        assert!((variance(&draws) / v - 1.0).abs() < 0.05);
        assert!(st.audit(&data) < 1e-12);
    }

    #[test]
    fn alpha_is_noop_without_covariates() {
        let (data, basis) = toy(10, 4, 2, 3, 0);
        let mut st = state_for(&data, &basis, 0.5, 0.0, 1);
        let before = st.eta().to_vec();
        update_alpha(&mut st, &data, &Priors::default(), &mut rng_from_seed(1));
        assert_eq!(before, st.eta());
    }

    #[test]
    fn sigma2_posterior_mean_example() {
        // n = 4, SSR = 2 → InvGamma(2.1, 1.1), mean 1.0.
        let domain = Arc::new(SpatialDomain::square_grid(2));
        let y = DVector::from_vec(vec![1.0, -1.0, 0.0, 0.0]);
        let data = Dataset::new(
            y,
            DMatrix::zeros(4, 0),
            DMatrix::zeros(4, 4),
            domain.clone(),
        )
        .unwrap();
        let basis = FieldBasis::new(&domain, &[2, 1], Some(1.0)).unwrap();
        let mut st = state_for(&data, &basis, 0.5, 0.0, 1);
        let mut rng = rng_from_seed(4);
        let draws: Vec<f64> = (0..200_000)
            .map(|_| {
                update_sigma2(&mut st, &data, &Priors::default(), &mut rng);
                st.sigma2()
            })
            .collect();
        // Var = b²/((a-1)²(a-2)) = 1.21/(1.21*0.1) = 10.
        let se = (10.0 / draws.len() as f64).sqrt();
        assert!((mean(&draws) - 1.0).abs() < 4.0 * se);
    }

    #[test]
    fn sigma_a_prior_when_field_is_thresholded_away() {
        let (data, basis) = toy(15, 4, 2, 5, 0);
        let mut st = state_for(&data, &basis, 0.5, 50.0, 1);
        assert!(st.beta().iter().all(|b| *b == 0.0));
        let mut rng = rng_from_seed(6);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| {
                update_sigma_a(&mut st, &data, &Priors::default(), &mut rng);
                st.sigma_a()
            })
            .collect();
        assert!(draws.iter().all(|d| *d > 0.0));
        let expect = (2.0 / std::f64::consts::PI).sqrt();
        let se = ((1.0 - 2.0 / std::f64::consts::PI) / draws.len() as f64).sqrt();
        assert!((mean(&draws) - expect).abs() < 4.0 * se);
    }

    #[test]
    fn sigma_a_recovers_noiseless_scale() {
        let (mut data, basis) = toy(60, 6, 3, 7, 0);
        let mut st = state_for(&data, &basis, 0.9, 0.3, 8);
        st.sigma_a = 2.0;
        st.refresh(&data);
        let y = DVector::from_vec(st.eta().to_vec());
        data.replace_response(y).unwrap();
        st.sigma2 = 1e-4;
        let mut rng = rng_from_seed(9);
        let draws: Vec<f64> = (0..5000)
            .map(|_| {
                update_sigma_a(&mut st, &data, &Priors::default(), &mut rng);
                st.sigma_a()
            })
            .collect();
        let m = mean(&draws);
        assert!(m > 1.8 && m < 2.2, "posterior mean {m}");
        assert!(st.audit(&data) < 1e-10);
    }

    #[test]
    fn lambda_out_of_bounds_rejected_and_same_value_accepted() {
        let (data, basis) = toy(20, 5, 3, 10, 1);
        let mut st = state_for(&data, &basis, 0.8, 0.5, 2);
        let mut rng = rng_from_seed(3);
        // Bounds pinned ⇒ no-op.
        assert!(update_lambda(&mut st, &data, (0.5, 0.5), 0.1, &mut rng).is_none());
        // Any candidate is outside a tiny interval far away from λ + sd·z.
        for _ in 0..200 {
            let out = update_lambda(&mut st, &data, (0.5, 0.5 + 1e-12), 10.0, &mut rng).unwrap();
            assert!(!out.accepted);
        }
        let same = lambda_step(&mut st, &data, ThresholdLevel::new(0.5).unwrap(), &mut rng);
        assert!(same.accepted && same.acceptance_prob == 1.0);
    }

    #[test]
    fn theta_same_candidate_has_unit_ratio() {
        let (data, basis) = toy(20, 5, 3, 11, 1);
        let st = state_for(&data, &basis, 0.7, 0.4, 3);
        let c = theta_candidate(&st, &data, &Priors::default(), 0.7, 0.05).unwrap();
        assert!(c.log_ratio.abs() < 1e-12, "{}", c.log_ratio);
        assert!(theta_candidate(&st, &data, &Priors::default(), 1.0, 0.05).is_none());
        assert!(theta_candidate(&st, &data, &Priors::default(), 0.0, 0.05).is_none());
    }

    #[test]
    fn theta_acceptance_keeps_caches_consistent() {
        let (data, basis) = toy(25, 5, 3, 12, 1);
        let mut st = state_for(&data, &basis, 0.7, 0.4, 4);
        let mut rng = rng_from_seed(5);
        let mut acc = 0;
        for _ in 0..200 {
            acc +=
                update_theta(&mut st, &data, &Priors::default(), 0.05, &mut rng).accepted as usize;
        }
        assert!(acc > 0);
        assert!(st.audit(&data) < 1e-10);
        let fresh = basis.at_theta(st.theta()).unwrap().1;
        assert_eq!(fresh.weights(), st.kernels().weights());
    }

    #[test]
    fn beta_proposal_moments() {
        let (a, b) = beta_proposal_shapes(0.9, 0.02);
        let m = a / (a + b);
        let v = a * b / ((a + b) * (a + b) * (a + b + 1.0));
        assert!((m - 0.9).abs() < 1e-12);
        assert!((v.sqrt() - 0.02).abs() < 1e-12);
        // Infeasible sd: mean kept, both shapes at least 0.01.
        let (a, b) = beta_proposal_shapes(0.999, 0.5);
        assert!(a >= 0.01 - 1e-12 && b >= 0.01 - 1e-12);
        assert!((a / (a + b) - 0.999).abs() < 1e-12);
    }

    #[test]
    fn knot_acceptance_matches_full_mh_ratio() {
        let (data, basis) = toy(30, 6, 3, 13, 1);
        let mut rng = rng_from_seed(14);
        for trial in 0..200 {
            let st = state_for(&data, &basis, 0.85, 0.6, 100 + trial);
            let l = trial as usize % st.a().len();
            let (m, v) = st.car().conditional(st.a(), l);
            let cand = m + v.sqrt() * std_normal(&mut rng);
            let delta = loglik_after(&st, &data, l, cand) - st.log_likelihood(&data);
            let mut a_new = st.a().to_vec();
            a_new[l] = cand;
            let lq = |x: f64| -0.5 * (x - m) * (x - m) / v;
            let full = delta + st.car().log_density(&a_new) - st.car().log_density(st.a())
                + lq(st.a()[l])
                - lq(cand);
            let fast = crate::model::loglik_delta_knot(&st, &data, l, cand);
            assert!(
                (full - fast).abs() < 1e-10 * full.abs().max(1.0),
                "trial {trial}: {full} vs {fast}"
            );
        }
    }

    fn loglik_after(st: &ModelState, data: &Dataset, l: usize, cand: f64) -> f64 {
        let mut s = st.clone();
        s.a[l] = cand;
        s.refresh(data);
        s.log_likelihood(data)
    }

    #[test]
    fn knots_mostly_accepted_without_signal() {
        // Independent noise with a weak image effect: the likelihood is
        // nearly flat in a, so the prior-conditional proposal is accepted.
        let (data, basis) = toy(100, 10, 5, 15, 1);
        let mut st = state_for(&data, &basis, 0.9, 0.0, 5);
        st.sigma_a = 0.05;
        st.refresh(&data);
        let mut rng = rng_from_seed(16);
        let mut scratch = KnotScratch::default();
        let order: Vec<usize> = (0..st.a().len()).collect();
        let mut acc = 0;
        for _ in 0..100 {
            acc += update_knots(&mut st, &data, &order, &mut scratch, &mut rng);
        }
        let rate = acc as f64 / (100 * order.len()) as f64;
        assert!(rate > 0.9, "rate {rate}");
        assert!(st.audit(&data) < 1e-9);
    }

    #[test]
    fn knot_chain_matches_conjugate_posterior() {
        // λ = 0, σ_a = σ² = 1: a | y is Gaussian; compare the sampled
        // marginal of a₁ with the closed form.
        let domain = Arc::new(SpatialDomain::square_grid(4));
        let mut rng = rng_from_seed(17);
        let n = 30;
        let x = DMatrix::from_fn(n, 16, |_, _| std_normal(&mut rng));
        let y = DVector::from_fn(n, |_, _| std_normal(&mut rng));
        let data = Dataset::without_covariates(y, x, domain.clone()).unwrap();
        let basis = FieldBasis::new(&domain, &[2, 1], Some(1.5)).unwrap();
        let mut st = state_for(&data, &basis, 0.5, 0.0, 6);
        // η = X K̃ a / sqrt(p) = H a with H n×2.
        let kt = st.kernels().standardized().to_dense();
        let h = data.x() * kt / 4.0;
        let q = st.car().precision_dense();
        let post_prec = &q + h.tr_mul(&h);
        let post_cov = post_prec.clone().try_inverse().unwrap();
        let post_mean = &post_cov * h.tr_mul(data.y());
        let mut scratch = KnotScratch::default();
        let order = vec![0, 1];
        let mut draws = Vec::new();
        for it in 0..60_000 {
            update_knots(&mut st, &data, &order, &mut scratch, &mut rng);
            if it >= 1000 {
                draws.push(st.a()[0]);
            }
        }
        // Batch-means standard error.
        let b = 100;
        let size = draws.len() / b;
        let means: Vec<f64> = (0..b)
            .map(|i| mean(&draws[i * size..(i + 1) * size]))
            .collect();
        let se = (variance(&means) / b as f64).sqrt();
        assert!(
            (mean(&draws) - post_mean[0]).abs() < 3.5 * se,
            "{} vs {}",
            mean(&draws),
            post_mean[0]
        );
        assert!((variance(&draws) / post_cov[(0, 0)] - 1.0).abs() < 0.1);
    }
}
