// Numerical kernels index several parallel arrays per loop, and `!(x > 0.0)`
// style guards are deliberate: they also reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod error;
pub mod mcmc;
pub mod metrics;
pub mod model;
pub mod simdata;
pub mod spatial;
pub mod stats;
pub mod study;
pub mod threshold;
