//! Synthetic study data: parametric truth images, exponential-covariance
//! and shared-structure image predictors, Gaussian and probit responses.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, StgpError};
use crate::model::Mode;
use crate::stats::{derive_seed, rng_from_seed, std_normal};

const TAG_REPLICATE: u64 = 0x5137;
/// Diagonal jitter tried once when the covariance Cholesky fails.
const JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    FivePeaks,
    Triangle,
}

impl std::str::FromStr for Shape {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "five_peaks" => Ok(Shape::FivePeaks),
            "triangle" => Ok(Shape::Triangle),
            other => Err(format!(
                "unknown shape `{other}` (expected five_peaks or triangle)"
            )),
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Shape::FivePeaks => "five_peaks",
            Shape::Triangle => "triangle",
        })
    }
}

/// True coefficient image on the `m x m` grid (location `j = row*m + col`)
/// with its sign partition.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueCoefficient {
    pub m: usize,
    pub beta: Vec<f64>,
    pub labels: Vec<i8>,
}

impl TrueCoefficient {
    pub fn from_values(m: usize, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != m * m {
            return Err(StgpError::DimensionMismatch {
                context: "true coefficient image",
                expected: m * m,
                found: beta.len(),
            });
        }
        let labels = beta
            .iter()
            .map(|&b| {
                if b > 0.0 {
                    1
                } else if b < 0.0 {
                    -1
                } else {
                    0
                }
            })
            .collect();
        Ok(TrueCoefficient { m, beta, labels })
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn nonzero(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l != 0).collect()
    }

    pub fn zero_fraction(&self) -> f64 {
        self.labels.iter().filter(|&&l| l == 0).count() as f64 / self.p() as f64
    }
}

/// Peak height of the truth images.
pub const AMPLITUDE: f64 = 1.0;

// Shapes are defined on the unit square so that the support occupies the
// same fraction of the grid at any resolution.
const PEAK_CENTERS: [(f64, f64); 5] = [
    (0.25, 0.25),
    (0.75, 0.22),
    (0.5, 0.5),
    (0.22, 0.78),
    (0.76, 0.74),
];
const PEAK_RADIUS: f64 = 0.13;
const PEAK_TAU: f64 = 0.2;
const TRIANGLE: [(f64, f64); 3] = [(0.15, 0.2), (0.85, 0.2), (0.5, 0.85)];

fn unit_coords(m: usize, j: usize) -> (f64, f64) {
    let (row, col) = (j / m, j % m);
    ((col as f64 + 0.5) / m as f64, (row as f64 + 0.5) / m as f64)
}

fn five_peaks_value(u: f64, v: f64) -> f64 {
    // Gaussian bump lowered by τ and clipped; the square makes the profile
    // meet zero with zero slope. Bump scale r chosen so the support radius
    // is PEAK_RADIUS.
    let r2 = PEAK_RADIUS * PEAK_RADIUS / (2.0 * (1.0 / PEAK_TAU).ln());
    PEAK_CENTERS
        .iter()
        .map(|&(cx, cy)| {
            let d2 = (u - cx).powi(2) + (v - cy).powi(2);
            let e = ((-d2 / (2.0 * r2)).exp() - PEAK_TAU).max(0.0) / (1.0 - PEAK_TAU);
            e * e
        })
        .fold(0.0, f64::max)
}

fn triangle_value(u: f64, v: f64) -> f64 {
    let [(x1, y1), (x2, y2), (x3, y3)] = TRIANGLE;
    let det = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3);
    let l1 = ((y2 - y3) * (u - x3) + (x3 - x2) * (v - y3)) / det;
    let l2 = ((y3 - y1) * (u - x3) + (x1 - x3) * (v - y3)) / det;
    let l3 = 1.0 - l1 - l2;
    // Smallest barycentric coordinate is 1/3 at the centroid, 0 on the edges.
    let depth = (3.0 * l1.min(l2).min(l3)).max(0.0);
    depth * depth
}

/// Parametric truth images. Both are continuous, vanish outside their
/// support and approach zero smoothly at its edge.
pub fn make_true_beta(shape: Shape, m: usize) -> Result<TrueCoefficient> {
    if m < 10 {
        return Err(invalid("m", format!("grid side must be >= 10, got {m}")));
    }
    let f = match shape {
        Shape::FivePeaks => five_peaks_value,
        Shape::Triangle => triangle_value,
    };
    let beta = (0..m * m)
        .map(|j| {
            let (u, v) = unit_coords(m, j);
            AMPLITUDE * f(u, v)
        })
        .collect();
    TrueCoefficient::from_values(m, beta)
}

/// Draws of zero-mean unit-variance Gaussian fields on the `m x m` grid with
/// covariance `exp(-d / θ_X)`, `d` Euclidean in grid units. The Cholesky
/// factor is computed once.
#[derive(Debug, Clone)]
pub struct ExpFieldSampler {
    m: usize,
    theta_x: f64,
    lower: DMatrix<f64>,
}

impl ExpFieldSampler {
    pub fn new(m: usize, theta_x: f64) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m", "grid side must be positive"));
        }
        if !(theta_x > 0.0 && theta_x.is_finite()) {
            return Err(invalid(
                "theta_x",
                format!("must be positive, got {theta_x}"),
            ));
        }
        let p = m * m;
        let cov = DMatrix::from_fn(p, p, |j, l| {
            let (dr, dc) = (
                (j / m) as f64 - (l / m) as f64,
                (j % m) as f64 - (l % m) as f64,
            );
            (-(dr * dr + dc * dc).sqrt() / theta_x).exp()
        });
        let lower = match cov.clone().cholesky() {
            Some(c) => c.unpack(),
            None => {
                let jittered = cov + DMatrix::identity(p, p) * JITTER;
                jittered
                    .cholesky()
                    .ok_or(StgpError::NotPositiveDefinite(
                        "exponential image covariance",
                    ))?
                    .unpack()
            }
        };
        Ok(ExpFieldSampler { m, theta_x, lower })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn theta_x(&self) -> f64 {
        self.theta_x
    }

    /// `n x p` matrix of independent fields, one per row.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let p = self.m * self.m;
        let z = DMatrix::from_fn(n, p, |_, _| std_normal(rng));
        z * self.lower.transpose()
    }
}

pub fn sample_exp_images<R: Rng + ?Sized>(
    m: usize,
    theta_x: f64,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    Ok(ExpFieldSampler::new(m, theta_x)?.sample(n, rng))
}

/// Correlation range of the background field in shared-structure images.
pub const SHARED_THETA_X: f64 = 3.0;

/// `X_i = X̃_i / 2 + e_i β₀` with `X̃_i` exponential-covariance fields
/// (θ_X = 3) and `e_i ~ N(0, υ²)`.
pub fn sample_shared_structure_images<R: Rng + ?Sized>(
    m: usize,
    upsilon: f64,
    n: usize,
    rng: &mut R,
    beta0: &TrueCoefficient,
) -> Result<DMatrix<f64>> {
    if beta0.m != m {
        return Err(StgpError::DimensionMismatch {
            context: "truth grid side",
            expected: m,
            found: beta0.m,
        });
    }
    if !(upsilon >= 0.0) {
        return Err(invalid("upsilon", "must be nonnegative"));
    }
    let mut x = sample_exp_images(m, SHARED_THETA_X, n, rng)? * 0.5;
    for i in 0..n {
        let e = upsilon * std_normal(rng);
        for (j, b) in beta0.beta.iter().enumerate() {
            x[(i, j)] += e * b;
        }
    }
    Ok(x)
}

fn check_design(x: &DMatrix<f64>, beta0: &[f64]) -> Result<()> {
    if x.ncols() != beta0.len() {
        return Err(StgpError::DimensionMismatch {
            context: "image columns vs truth",
            expected: beta0.len(),
            found: x.ncols(),
        });
    }
    Ok(())
}

/// `Y = X β₀ + σ ε` (plain inner product, no `p^{-1/2}`).
pub fn generate_gaussian_response<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    beta0: &[f64],
    sigma: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    check_design(x, beta0)?;
    if !(sigma >= 0.0) {
        return Err(invalid("sigma", "must be nonnegative"));
    }
    let mean = x * DVector::from_column_slice(beta0);
    Ok(mean.map(|m| m + sigma * std_normal(rng)))
}

/// `Y = 1{X β₀ + ε > 0}`.
pub fn generate_probit_response<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    beta0: &[f64],
    rng: &mut R,
) -> Result<DVector<f64>> {
    check_design(x, beta0)?;
    let mean = x * DVector::from_column_slice(beta0);
    Ok(mean.map(|m| if m + std_normal(rng) > 0.0 { 1.0 } else { 0.0 }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Covariance {
    /// Exponential covariance with range θ_X.
    Exp { theta_x: f64 },
    /// Shared structure with scale υ.
    Shared { upsilon: f64 },
}

impl std::fmt::Display for Covariance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Covariance::Exp { theta_x } => write!(f, "Exp({theta_x})"),
            Covariance::Shared { upsilon } => write!(f, "SS({upsilon})"),
        }
    }
}

/// One cell of the simulation design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub shape: Shape,
    pub m: usize,
    pub n: usize,
    pub covariance: Covariance,
    /// Noise sd (Gaussian responses).
    pub sigma: f64,
    pub mode: Mode,
}

impl Scenario {
    /// Five peaks, Exp(3), σ = 5, n = 100 on a 30 x 30 grid.
    pub fn benchmark() -> Self {
        Scenario {
            shape: Shape::FivePeaks,
            m: 30,
            n: 100,
            covariance: Covariance::Exp { theta_x: 3.0 },
            sigma: 5.0,
            mode: Mode::Gaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 10 {
            return Err(invalid(
                "m",
                format!("grid side must be >= 10, got {}", self.m),
            ));
        }
        if self.n < 2 {
            return Err(invalid("n", "need at least two subjects"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", "must be finite and nonnegative"));
        }
        match self.covariance {
            Covariance::Exp { theta_x } if !(theta_x > 0.0) => {
                Err(invalid("theta_x", "must be positive"))
            }
            Covariance::Shared { upsilon } if !(upsilon >= 0.0) => {
                Err(invalid("upsilon", "must be nonnegative"))
            }
            _ => Ok(()),
        }
    }
}

/// Raw (unnormalized) replicate.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub index: usize,
    pub seed: u64,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

/// Replicate `index` of a scenario, drawn from its own derived stream.
pub fn generate_replicate(
    scenario: &Scenario,
    truth: &TrueCoefficient,
    images: Option<&ExpFieldSampler>,
    base_seed: u64,
    index: usize,
) -> Result<Replicate> {
    scenario.validate()?;
    let seed = derive_seed(base_seed, TAG_REPLICATE, index as u64);
    let mut rng = rng_from_seed(seed);
    let x = match scenario.covariance {
        Covariance::Exp { theta_x } => match images {
            Some(s) if s.m() == scenario.m && s.theta_x() == theta_x => {
                s.sample(scenario.n, &mut rng)
            }
            _ => sample_exp_images(scenario.m, theta_x, scenario.n, &mut rng)?,
        },
        Covariance::Shared { upsilon } => {
            sample_shared_structure_images(scenario.m, upsilon, scenario.n, &mut rng, truth)?
        }
    };
    let y = match scenario.mode {
        Mode::Gaussian => generate_gaussian_response(&x, &truth.beta, scenario.sigma, &mut rng)?,
        Mode::Probit => generate_probit_response(&x, &truth.beta, &mut rng)?,
    };
    Ok(Replicate { index, seed, x, y })
}
