use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use pcnn_core::network::{build_ridge_network, CoordinateBox, RidgeSpec, SamplingPlan};
use pcnn_core::ridge::{ProfileKind, ProfileSpec};
use pcnn_core::spectral::{sample_grid, TorusRidge};

fn batch_evaluation(c: &mut Criterion) {
    let d = 8;
    let mut a = vec![0.0; d];
    a[..3].copy_from_slice(&[1.0, -1.0, 1.0]);
    let region = CoordinateBox::cube(d, 0.0, 1.0).unwrap();
    let profile = ProfileSpec::from_kind(&ProfileKind::Cos { frequency: 1.0 }, -1.0, 2.0).unwrap();
    let spec = RidgeSpec::new(a, profile).unwrap();
    let plan = SamplingPlan { samples: 16, seed: 1 };
    let net = build_ridge_network(&spec, 2, 32, &region, plan).unwrap().network;

    let mut group = c.benchmark_group("evaluate_batch");
    for n in [1_000usize, 20_000] {
        let points = region.sample_points(n, 7);
        group.bench_with_input(BenchmarkId::new("parallel", n), &points, |b, p| {
            b.iter(|| net.evaluate_batch(black_box(p)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &points, |b, p| {
            b.iter(|| net.evaluate_batch_sequential(black_box(p)).unwrap())
        });
    }
    group.finish();
}

fn grid_sampling(c: &mut Criterion) {
    let ridge = TorusRidge::counterexample(3).unwrap();
    let n = 32;
    let mut group = c.benchmark_group("grid_sampling");
    group.bench_function("parallel", |b| {
        b.iter(|| sample_grid(|x| ridge.evaluate(x), 3, black_box(n)).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let idx: Vec<usize> = (0..n * n * n).collect();
            pcnn_core::par::map_sequential(&idx, |&i| {
                ridge.evaluate(&pcnn_core::spectral::grid_point(i, 3, black_box(n)))
            })
        })
    });
    group.finish();
}

criterion_group!(benches, batch_evaluation, grid_sampling);
criterion_main!(benches);
