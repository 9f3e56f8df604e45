//! Same workloads on a one-thread pool and on the default rayon pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gw_bounds::bounds::{local_distance_matrix, pairwise_matrix};
use gw_bounds::shapes::gaussian_structured;
use gw_bounds::{Bound, BoundConfig, QuadratureSpec};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("sequential", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", rayon::ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn bench(c: &mut Criterion) {
    let spaces: Vec<_> = (0..12).map(|s| gaussian_structured(60, 2, s).unwrap()).collect();
    let big: Vec<_> = (0..2).map(|s| gaussian_structured(400, 2, 100 + s).unwrap()).collect();
    let cfg = BoundConfig {
        rule: QuadratureSpec::Midpoint { r: 50 },
        num_projections: 200,
        ..BoundConfig::default()
    };
    let mut g = c.benchmark_group("parallel_vs_sequential");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new("pairwise_tlb", name), |b| {
            b.iter(|| pool.install(|| pairwise_matrix(&spaces, Bound::Tlb, &cfg).unwrap()))
        });
        g.bench_function(BenchmarkId::new("local_distance_matrix", name), |b| {
            b.iter(|| pool.install(|| local_distance_matrix(big[0].base(), big[1].base(), 2.0).unwrap()))
        });
        g.bench_function(BenchmarkId::new("pairwise_stlb", name), |b| {
            b.iter(|| pool.install(|| pairwise_matrix(&spaces, Bound::Stlb, &cfg).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
