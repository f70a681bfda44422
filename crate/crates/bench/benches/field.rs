use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use stgp_bench::benchmark_problem;
use stgp_core::mcmc::{McmcConfig, Sampler};
use stgp_core::model::loglik_delta_knot;
use stgp_core::threshold::{soft_threshold_field, ThresholdLevel};

fn threshold(c: &mut Criterion) {
    let xs: Vec<f64> = (0..900)
        .map(|j| ((j * 37) % 101) as f64 / 25.0 - 2.0)
        .collect();
    let lam = ThresholdLevel::new(1.0).unwrap();
    c.bench_function("soft_threshold_field_900", |b| {
        b.iter(|| soft_threshold_field(black_box(&xs), lam))
    });
}

fn standardize(c: &mut Criterion) {
    let (_, basis) = benchmark_problem(30, 100);
    c.bench_function("standardize_kernels_p900_l225", |b| {
        b.iter(|| basis.at_theta(black_box(0.9)).unwrap())
    });
}

fn knot_delta(c: &mut Criterion) {
    let (data, basis) = benchmark_problem(30, 100);
    let cfg = McmcConfig::default();
    let mut sampler = Sampler::new(&data, &basis, &cfg, (0.5, 1.5)).unwrap();
    for _ in 0..50 {
        sampler.step();
    }
    let st = sampler.state();
    let a = st.a().to_vec();
    c.bench_function("loglik_delta_knot_p900", |b| {
        let mut l = 0;
        b.iter(|| {
            l = (l + 1) % a.len();
            loglik_delta_knot(st, &data, l, a[l] + 0.1)
        })
    });
}

criterion_group!(benches, threshold, standardize, knot_delta);
criterion_main!(benches);
