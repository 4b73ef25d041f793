//! Pipeline and kernel throughput, sequential vs rayon.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use speccurve::exec::ExecMode;
use speccurve::metrics::{chamfer, hausdorff};
use speccurve::pipeline::{run_suite, PipelineConfig};
use speccurve::synth::{fidelity_suite, DEFAULT_MASTER_SEED};

fn bench_pipeline(c: &mut Criterion) {
    let suite = fidelity_suite(DEFAULT_MASTER_SEED, 8); // 56 curves
    let cfg = PipelineConfig::default();

    let mut group = c.benchmark_group("pipeline_suite");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("mode", "sequential"), &suite, |b, s| {
        b.iter(|| black_box(run_suite(s, &cfg, ExecMode::Sequential)));
    });
    #[cfg(feature = "parallel")]
    group.bench_with_input(BenchmarkId::new("mode", "parallel"), &suite, |b, s| {
        b.iter(|| black_box(run_suite(s, &cfg, ExecMode::Parallel)));
    });
    group.finish();
}

fn bench_distances(c: &mut Criterion) {
    let suite = fidelity_suite(DEFAULT_MASTER_SEED, 1);
    let a = &suite[0].curves[0].points;
    let b = suite[1].curves[0].points.to_vec();

    let mut group = c.benchmark_group("point_cloud");
    group.sample_size(20);
    group.bench_function("chamfer", |bencher| {
        bencher.iter(|| black_box(chamfer(black_box(a), black_box(&b)).unwrap()));
    });
    group.bench_function("hausdorff", |bencher| {
        bencher.iter(|| black_box(hausdorff(black_box(a), black_box(&b)).unwrap()));
    });
    group.finish();
}

criterion_group!(benches, bench_pipeline, bench_distances);
criterion_main!(benches);
