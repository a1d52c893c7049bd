//! Parallel versus sequential execution of the heavy pipeline stages.

use std::hint::black_box;

use channel_chart::synth::preset_quadriga_like;
use channel_chart::{
    build_distance_matrix, exec, generate_scenario, geodesic_distances, knn_graph, quality_curves, rank_table,
    ChannelDataset, Measure,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn scenario(n: usize) -> ChannelDataset {
    let mut cfg = preset_quadriga_like();
    cfg.user_count = n;
    generate_scenario(&cfg).expect("scenario")
}

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", false), ("sequential", true)]
}

fn run<R>(sequential: bool, f: impl FnOnce() -> R) -> R {
    if sequential {
        exec::sequential(f)
    } else {
        f()
    }
}

fn distances(c: &mut Criterion) {
    let ds = scenario(600);
    let mut group = c.benchmark_group("distance_matrix");
    group.sample_size(10);
    for (name, seq) in modes() {
        group.bench_function(BenchmarkId::new(name, ds.len()), |b| {
            b.iter(|| run(seq, || build_distance_matrix(black_box(&ds), Measure::PhaseInsensitive).unwrap()))
        });
    }
    group.finish();
}

fn geodesics(c: &mut Criterion) {
    let ds = scenario(600);
    let d = build_distance_matrix(&ds, Measure::PhaseInsensitive).unwrap();
    let graph = knn_graph(&d, 20).unwrap();
    let mut group = c.benchmark_group("geodesics");
    group.sample_size(10);
    for (name, seq) in modes() {
        group.bench_function(BenchmarkId::new(name, ds.len()), |b| {
            b.iter(|| run(seq, || geodesic_distances(black_box(&graph)).unwrap()))
        });
    }
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let ds = scenario(600);
    let pos = ds.positions().unwrap().clone();
    let ks = [5, 10, 25, 50];
    let mut group = c.benchmark_group("metrics");
    group.sample_size(10);
    for (name, seq) in modes() {
        group.bench_function(BenchmarkId::new(format!("rank_table/{name}"), pos.len()), |b| {
            b.iter(|| run(seq, || rank_table(black_box(&pos)).unwrap()))
        });
        group.bench_function(BenchmarkId::new(format!("quality_curves/{name}"), pos.len()), |b| {
            b.iter(|| run(seq, || quality_curves(black_box(&pos), &pos, &ks).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, distances, geodesics, metrics);
criterion_main!(benches);
