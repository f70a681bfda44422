//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use nalgebra::DMatrix;
use stgp_core::model::{normalize_dataset, Dataset, FieldBasis, NormalizeOptions};
use stgp_core::simdata::{generate_replicate, make_true_beta, Scenario};
use stgp_core::spatial::SpatialDomain;

/// Normalized replicate 0 of the benchmark scenario (p = m², L = (m/2)²).
pub fn benchmark_problem(m: usize, n: usize) -> (Dataset, FieldBasis) {
    let sc = Scenario {
        m,
        n,
        ..Scenario::benchmark()
    };
    let truth = make_true_beta(sc.shape, m).expect("valid shape");
    let rep = generate_replicate(&sc, &truth, None, 1, 0).expect("valid scenario");
    let domain = Arc::new(SpatialDomain::square_grid(m));
    let raw = Dataset::new(rep.y, DMatrix::zeros(n, 0), rep.x, domain.clone())
        .expect("consistent shapes");
    let data =
        normalize_dataset(&raw, sc.mode, NormalizeOptions::default()).expect("nondegenerate");
    let basis = FieldBasis::new(&domain, &[m / 2, m / 2], None).expect("valid knots");
    (data, basis)
}
