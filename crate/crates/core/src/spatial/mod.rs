//! Knot grids, tapered kernels, the CAR prior on knot coefficients and the
//! standardized kernel system that gives the latent field unit variance.

mod band;
mod car;
mod grid;
mod kernel;
mod sparse;

pub use band::BandCholesky;
pub use car::{car_conditional, car_precision, sample_car, CarStructure};
pub use grid::{build_knot_grid, Adjacency, KnotGrid, SpatialDomain};
pub use kernel::{
    kernel_matrix, kernel_value, latent_variances, standardize_kernels, standardize_kernels_with,
    KernelSystem, WeightRule, TAPER_RADIUS,
};
pub use sparse::SparseMatrix;
