use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use stgp_bench::benchmark_problem;
use stgp_core::mcmc::{McmcConfig, Sampler};

fn iteration(c: &mut Criterion) {
    let mut group = c.benchmark_group("iteration");
    group.sample_size(20);
    for (m, n) in [(20, 100), (30, 100)] {
        let (data, basis) = benchmark_problem(m, n);
        let cfg = McmcConfig::default();
        let mut sampler = Sampler::new(&data, &basis, &cfg, (0.5, 1.5)).unwrap();
        // Move off the initial state before timing.
        for _ in 0..50 {
            sampler.step();
        }
        group.bench_function(format!("p{}_n{n}", m * m), |b| b.iter(|| sampler.step()));
    }
    group.finish();
}

fn sampler_setup(c: &mut Criterion) {
    let (data, basis) = benchmark_problem(30, 100);
    let cfg = McmcConfig::default();
    c.bench_function("sampler_new_p900", |b| {
        b.iter_batched(
            || (),
            |_| Sampler::new(&data, &basis, &cfg, (0.5, 1.5)).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, iteration, sampler_setup);
criterion_main!(benches);
