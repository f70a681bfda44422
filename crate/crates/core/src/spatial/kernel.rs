use rayon::prelude::*;

use super::car::CarStructure;
use super::grid::{KnotGrid, SpatialDomain};
use super::sparse::SparseMatrix;
use crate::error::{invalid, Result, StgpError};

/// Kernels vanish at and beyond this many bandwidths.
pub const TAPER_RADIUS: f64 = 3.0;

/// Tapered Gaussian kernel `exp(-h²/(2σ_h²)) I(h < 3σ_h)`.
#[inline]
pub fn kernel_value(h: f64, sigma_h: f64) -> f64 {
    if h < TAPER_RADIUS * sigma_h {
        (-h * h / (2.0 * sigma_h * sigma_h)).exp()
    } else {
        0.0
    }
}

/// The `p x L` matrix of `K(||s_j - t_l||)`, keeping only entries inside
/// the taper radius. Every location must be covered by at least one knot.
pub fn kernel_matrix(
    domain: &SpatialDomain,
    grid: &KnotGrid,
    sigma_h: f64,
) -> Result<SparseMatrix> {
    if domain.dim() != grid.dim() {
        return Err(StgpError::DimensionMismatch {
            context: "kernel matrix (location vs knot dimension)",
            expected: grid.dim(),
            found: domain.dim(),
        });
    }
    if !(sigma_h > 0.0) || !sigma_h.is_finite() {
        return Err(invalid(
            "sigma_h",
            format!("must be positive, got {sigma_h}"),
        ));
    }
    let rows: Vec<Vec<(usize, f64)>> = (0..domain.len())
        .into_par_iter()
        .map(|j| {
            let s = domain.location(j);
            (0..grid.len())
                .filter_map(|l| {
                    let h = s
                        .iter()
                        .zip(grid.knot(l))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    let v = kernel_value(h, sigma_h);
                    (v > 0.0).then_some((l, v))
                })
                .collect()
        })
        .collect();
    if let Some(j) = rows.iter().position(Vec::is_empty) {
        return Err(StgpError::UncoveredLocation {
            index: j,
            coords: domain.location(j).to_vec(),
        });
    }
    Ok(SparseMatrix::from_rows(grid.len(), rows))
}

/// How the row divisors `w_j` are derived from the latent variance
/// `v_j = (K Q^{-1} Kᵀ)_{jj}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightRule {
    /// `w_j = sqrt(v_j)`: unit prior variance at every location.
    #[default]
    StdDev,
    /// `w_j = v_j`. Does not standardize; kept to exercise the checks that
    /// must catch it.
    Variance,
}

/// Raw kernels, weights and the standardized kernel matrix `K̃ = diag(w)^{-1} K`.
#[derive(Debug, Clone)]
pub struct KernelSystem {
    sigma_h: f64,
    raw: SparseMatrix,
    weights: Vec<f64>,
    standardized: SparseMatrix,
    rule: WeightRule,
}

impl KernelSystem {
    pub fn sigma_h(&self) -> f64 {
        self.sigma_h
    }

    pub fn raw(&self) -> &SparseMatrix {
        &self.raw
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn standardized(&self) -> &SparseMatrix {
        &self.standardized
    }

    pub fn n_locations(&self) -> usize {
        self.raw.nrows()
    }

    pub fn n_knots(&self) -> usize {
        self.raw.ncols()
    }

    pub fn rule(&self) -> WeightRule {
        self.rule
    }

    /// Re-standardizes the same raw kernels for a new CAR structure.
    pub fn restandardize(&self, car: &CarStructure) -> Result<KernelSystem> {
        standardize_kernels_with(self.raw.clone(), self.sigma_h, car, self.rule)
    }
}

/// `diag(K Q^{-1} Kᵀ)` using the cached band factor of `Q`; only the
/// `L x L` inverse is formed, never the `p x p` product.
pub fn latent_variances(k: &SparseMatrix, car: &CarStructure) -> Vec<f64> {
    let l = car.len();
    let qinv = car.cholesky().inverse_dense();
    (0..k.nrows())
        .into_par_iter()
        .map(|j| {
            let (idx, vals) = k.row(j);
            let mut v = 0.0;
            for (a, (&la, &ka)) in idx.iter().zip(vals).enumerate() {
                let row = &qinv[la * l..(la + 1) * l];
                v += ka * ka * row[la];
                for (&lb, &kb) in idx[a + 1..].iter().zip(&vals[a + 1..]) {
                    v += 2.0 * ka * kb * row[lb];
                }
            }
            v
        })
        .collect()
}

pub fn standardize_kernels(
    k: SparseMatrix,
    sigma_h: f64,
    car: &CarStructure,
) -> Result<KernelSystem> {
    standardize_kernels_with(k, sigma_h, car, WeightRule::StdDev)
}

pub fn standardize_kernels_with(
    k: SparseMatrix,
    sigma_h: f64,
    car: &CarStructure,
    rule: WeightRule,
) -> Result<KernelSystem> {
    if k.ncols() != car.len() {
        return Err(StgpError::DimensionMismatch {
            context: "kernel columns vs CAR knots",
            expected: car.len(),
            found: k.ncols(),
        });
    }
    let variances = latent_variances(&k, car);
    let weights: Vec<f64> = variances
        .iter()
        .map(|&v| match rule {
            WeightRule::StdDev => v.sqrt(),
            WeightRule::Variance => v,
        })
        .collect();
    if let Some(j) = weights.iter().position(|w| !(*w > 0.0)) {
        return Err(StgpError::InvalidData(format!(
            "kernel row {j} has zero prior variance"
        )));
    }
    let standardized = k.divide_rows(&weights);
    Ok(KernelSystem {
        sigma_h,
        raw: k,
        weights,
        standardized,
        rule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::car::car_precision;
    use crate::spatial::grid::{build_knot_grid, Adjacency};
    use std::sync::Arc;

    #[test]
    fn kernel_value_examples() {
        assert_eq!(kernel_value(0.0, 2.0), 1.0);
        assert_eq!(kernel_value(6.0, 2.0), 0.0);
        assert_eq!(kernel_value(7.0, 2.0), 0.0);
        assert!((kernel_value(2.0, 2.0) - 0.606_531).abs() < 1e-6);
        assert!((kernel_value(5.999, 2.0) - (-5.999f64 * 5.999 / 8.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn coincident_location_and_knot() {
        let dom = SpatialDomain::new(1, vec![2.0]).unwrap();
        let g = build_knot_grid(&dom, &[1]).unwrap();
        let k = kernel_matrix(&dom, &g, 1.0).unwrap();
        assert_eq!(k.to_dense(), nalgebra::DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn midway_location() {
        let knots = SpatialDomain::new(1, vec![0.0, 2.0]).unwrap();
        let g = build_knot_grid(&knots, &[2]).unwrap();
        let dom = SpatialDomain::new(1, vec![1.0]).unwrap();
        let k = kernel_matrix(&dom, &g, 1.0).unwrap();
        let (idx, vals) = k.row(0);
        assert_eq!(idx, &[0, 1]);
        for v in vals {
            assert!((v - 0.6065).abs() < 1e-4);
        }
    }

    #[test]
    fn uncovered_location_named() {
        let knots = SpatialDomain::new(1, vec![0.0, 1.0]).unwrap();
        let g = build_knot_grid(&knots, &[2]).unwrap();
        let dom = SpatialDomain::new(1, vec![0.0, 10.0]).unwrap();
        match kernel_matrix(&dom, &g, 1.0) {
            Err(StgpError::UncoveredLocation { index, coords }) => {
                assert_eq!(index, 1);
                assert_eq!(coords, vec![10.0]);
            }
            other => panic!("expected uncovered location, got {other:?}"),
        }
    }

    #[test]
    fn support_matches_brute_force() {
        let dom = SpatialDomain::square_grid(12);
        let g = build_knot_grid(&dom, &[6, 6]).unwrap();
        let sh = g.min_spacing().unwrap();
        let k = kernel_matrix(&dom, &g, sh).unwrap();
        for j in 0..dom.len() {
            let expect: Vec<usize> = (0..g.len())
                .filter(|&l| {
                    let s = dom.location(j);
                    let t = g.knot(l);
                    ((s[0] - t[0]).powi(2) + (s[1] - t[1]).powi(2)).sqrt() < 3.0 * sh
                })
                .collect();
            assert_eq!(k.row(j).0, expect.as_slice());
        }
    }

    #[test]
    fn two_knot_standardization() {
        // Location on knot 0, knot 1 outside the taper: raw variance (Q^{-1})_00 = 4/3.
        let car = CarStructure::new(Arc::new(Adjacency::chain(2)), 0.5).unwrap();
        let k = SparseMatrix::from_rows(2, vec![vec![(0, 1.0)]]);
        let ks = standardize_kernels(k, 1.0, &car).unwrap();
        assert!((ks.weights()[0] - (4.0f64 / 3.0).sqrt()).abs() < 1e-14);
        let v = latent_variances(ks.standardized(), &car);
        assert!((v[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn standardization_is_idempotent() {
        let dom = SpatialDomain::square_grid(8);
        let g = build_knot_grid(&dom, &[4, 4]).unwrap();
        let car = car_precision(&g, 0.9).unwrap();
        let k = kernel_matrix(&dom, &g, g.min_spacing().unwrap()).unwrap();
        let ks = standardize_kernels(k, 1.0, &car).unwrap();
        let again = standardize_kernels(ks.standardized().clone(), 1.0, &car).unwrap();
        for w in again.weights() {
            assert!((w - 1.0).abs() < 1e-12);
        }
        let diff = (again.standardized().to_dense() - ks.standardized().to_dense())
            .abs()
            .max();
        assert!(diff < 1e-12);
    }

    #[test]
    fn unit_variance_against_dense_recomputation() {
        let dom = SpatialDomain::square_grid(10);
        let g = build_knot_grid(&dom, &[5, 5]).unwrap();
        for &theta in &[0.3, 0.9, 0.99] {
            let car = car_precision(&g, theta).unwrap();
            let k = kernel_matrix(&dom, &g, g.min_spacing().unwrap()).unwrap();
            let ks = standardize_kernels(k, 1.0, &car).unwrap();
            let kt = ks.standardized().to_dense();
            let qinv = car.precision_dense().try_inverse().unwrap();
            let cov = &kt * qinv * kt.transpose();
            for j in 0..dom.len() {
                assert!((cov[(j, j)] - 1.0).abs() < 1e-8, "theta={theta} j={j}");
            }
        }
    }

    #[test]
    fn variance_rule_fails_to_standardize() {
        let dom = SpatialDomain::square_grid(10);
        let g = build_knot_grid(&dom, &[5, 5]).unwrap();
        let car = car_precision(&g, 0.9).unwrap();
        let k = kernel_matrix(&dom, &g, g.min_spacing().unwrap()).unwrap();
        let ks = standardize_kernels_with(k, 1.0, &car, WeightRule::Variance).unwrap();
        let v = latent_variances(ks.standardized(), &car);
        assert!(v.iter().any(|x| (x - 1.0).abs() > 1e-3));
    }

    #[test]
    fn rescaling_coordinates_and_bandwidth_is_invariant() {
        let dom = SpatialDomain::square_grid(9);
        let g = build_knot_grid(&dom, &[4, 4]).unwrap();
        let sh = g.min_spacing().unwrap();
        let car = car_precision(&g, 0.8).unwrap();
        let base = standardize_kernels(kernel_matrix(&dom, &g, sh).unwrap(), sh, &car).unwrap();
        for &c in &[0.37, 4.0, 15.5] {
            let dom_c = dom.scaled(c);
            let g_c = build_knot_grid(&dom_c, &[4, 4]).unwrap();
            let k_c = kernel_matrix(&dom_c, &g_c, sh * c).unwrap();
            let ks_c = standardize_kernels(k_c, sh * c, &car).unwrap();
            assert_eq!(ks_c.raw().nnz(), base.raw().nnz());
            let d_raw = (ks_c.raw().to_dense() - base.raw().to_dense()).abs().max();
            let d_std = (ks_c.standardized().to_dense() - base.standardized().to_dense())
                .abs()
                .max();
            assert!(d_raw < 1e-12 && d_std < 1e-12, "c={c}");
            for (a, b) in ks_c.weights().iter().zip(base.weights()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
