use crate::error::{invalid, Result};
use crate::spatial::{
    build_knot_grid, car_precision, kernel_matrix, standardize_kernels_with, CarStructure,
    KernelSystem, KnotGrid, SparseMatrix, SpatialDomain, WeightRule,
};

/// The parts of the latent-field construction that do not depend on ϑ:
/// knot grid, bandwidth and raw tapered kernel matrix.
#[derive(Debug, Clone)]
pub struct FieldBasis {
    grid: KnotGrid,
    raw: SparseMatrix,
    sigma_h: f64,
    rule: WeightRule,
}

impl FieldBasis {
    /// `sigma_h = None` uses the minimum inter-knot distance.
    pub fn new(domain: &SpatialDomain, knot_dims: &[usize], sigma_h: Option<f64>) -> Result<Self> {
        let grid = build_knot_grid(domain, knot_dims)?;
        let sigma_h = match sigma_h {
            Some(s) => s,
            None => grid
                .min_spacing()
                .ok_or_else(|| invalid("sigma_h", "a single-knot grid has no default bandwidth"))?,
        };
        let raw = kernel_matrix(domain, &grid, sigma_h)?;
        Ok(FieldBasis {
            grid,
            raw,
            sigma_h,
            rule: WeightRule::StdDev,
        })
    }

    /// Overrides the standardization rule (fault injection only).
    pub fn with_weight_rule(mut self, rule: WeightRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    pub fn raw_kernels(&self) -> &SparseMatrix {
        &self.raw
    }

    pub fn sigma_h(&self) -> f64 {
        self.sigma_h
    }

    pub fn n_knots(&self) -> usize {
        self.grid.len()
    }

    /// CAR structure and standardized kernels at dependence `theta`.
    pub fn at_theta(&self, theta: f64) -> Result<(CarStructure, KernelSystem)> {
        let car = car_precision(&self.grid, theta)?;
        let ks = standardize_kernels_with(self.raw.clone(), self.sigma_h, &car, self.rule)?;
        Ok((car, ks))
    }
}
