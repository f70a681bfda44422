//! Datasets, the coefficient field and the Gaussian / probit likelihood with
//! knot-local delta updates.

mod basis;
mod dataset;
mod state;

pub use basis::FieldBasis;
pub use dataset::{
    normalize_dataset, ColumnScaling, Dataset, Mode, Normalization, NormalizeOptions,
};
pub use state::{
    coefficient_field, gaussian_loglik, linear_predictor, loglik_delta_knot, probit_augment,
    KnotScratch, ModelState, StateParams,
};
pub(crate) use state::{
    covariate_predictor, gaussian_loglik_from, image_predictor, threshold_and_scale,
};
