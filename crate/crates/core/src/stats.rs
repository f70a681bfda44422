//! Scalar distribution helpers shared by the sampler, the generators and the
//! metrics: standard normal CDF/quantile, truncated normal draws, inverse
//! gamma draws and the beta log density.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;

/// Lower truncation point beyond which the inverse-CDF draw loses precision
/// and the exponential rejection sampler takes over.
const INVERSE_CDF_LIMIT: f64 = 6.0;

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile. Returns `-inf`/`+inf` at 0 and 1.
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws `X ~ N(0, 1)` conditioned on `X > lower`.
pub fn truncated_std_normal_above<R: Rng + ?Sized>(lower: f64, rng: &mut R) -> f64 {
    if lower <= INVERSE_CDF_LIMIT {
        let tail = std_normal_cdf(-lower);
        loop {
            let u: f64 = rng.sample(Open01);
            let x = -std_normal_quantile(u * tail);
            if x > lower && x.is_finite() {
                return x;
            }
        }
    }
    // Robert (1995) translated-exponential proposal with the optimal rate.
    let rate = 0.5 * (lower + (lower * lower + 4.0).sqrt());
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let z = lower + exp.sample(rng);
        let u: f64 = rng.sample(Open01);
        if u.ln() <= -0.5 * (z - rate) * (z - rate) {
            return z;
        }
    }
}

/// Draws from `N(mean, sd^2)` truncated to `(0, inf)`.
pub fn truncated_normal_positive<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    mean + sd * truncated_std_normal_above(-mean / sd, rng)
}

/// Draws from `N(mean, sd^2)` truncated to `(-inf, 0]`.
pub fn truncated_normal_nonpositive<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    mean - sd * truncated_std_normal_above(mean / sd, rng)
}

/// Draws from `InvGamma(shape, scale)`, i.e. `1 / Gamma(shape, rate = scale)`.
pub fn inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0 / scale).expect("valid gamma parameters");
    1.0 / g.sample(rng)
}

pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()
}

/// splitmix64 finalizer, used to derive independent stream seeds.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `index` of purpose `tag` under a base seed.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    mix64(mix64(base ^ mix64(tag)) ^ index)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Empirical quantile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_values() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        // statrs' erfc carries ~1e-11 relative error.
        assert!((std_normal_cdf(1.96) - 0.975_002_104_851_780).abs() < 1e-10);
        assert!((std_normal_cdf(-1.0) - 0.158_655_253_931_457).abs() < 1e-10);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 1e-4, 0.025, 0.3, 0.5, 0.8, 0.975, 1.0 - 1e-9] {
            let x = std_normal_quantile(p);
            assert!((std_normal_cdf(x) - p).abs() < 1e-9 * p, "p={p}");
        }
    }

    #[test]
    fn truncated_draws_respect_bounds() {
        let mut rng = rng_from_seed(1);
        for &lower in &[-40.0, -2.0, 0.0, 3.0, 5.99, 6.01, 12.0, 40.0] {
            for _ in 0..2000 {
                let x = truncated_std_normal_above(lower, &mut rng);
                assert!(x > lower && x.is_finite());
            }
        }
    }

    #[test]
    fn truncated_mean_matches_mills_ratio() {
        // E[X | X > a] = phi(a) / (1 - Phi(a)).
        let mut rng = rng_from_seed(2);
        for &a in &[-1.0, 1.5, 7.0] {
            let draws: Vec<f64> = (0..200_000)
                .map(|_| truncated_std_normal_above(a, &mut rng))
                .collect();
            let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let expect = phi / std_normal_cdf(-a);
            let se = (variance(&draws) / draws.len() as f64).sqrt();
            assert!((mean(&draws) - expect).abs() < 4.0 * se, "a={a}");
        }
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 2, 4));
        assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 3, 3));
        assert_eq!(derive_seed(9, 9, 9), derive_seed(9, 9, 9));
    }

    #[test]
    fn beta_density_integrates_to_one() {
        let n = 200_000;
        let h = 1.0 / n as f64;
        let total: f64 = (0..n)
            .map(|i| beta_ln_pdf((i as f64 + 0.5) * h, 10.0, 1.0).exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-6);
    }
}
