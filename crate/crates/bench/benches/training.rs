use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tinydes::cluster::{fit_kmeans, KMeansParams};
use tinydes::selection::build_competence_model;
use tinydes::tinyformat::export_tiny;
use tinydes::trees::{generate_pool, PoolConfig};
use tinydes_bench::{workload, CLUSTERS, N_ACC};

fn training(c: &mut Criterion) {
    let w = workload(30);
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("generate_pool_45", |b| {
        b.iter(|| generate_pool(black_box(&w.train), &PoolConfig::default(), 3).unwrap())
    });
    group.bench_function("fit_kmeans_5", |b| {
        b.iter(|| fit_kmeans(black_box(w.dsel.samples()), &KMeansParams::new(CLUSTERS), 4).unwrap())
    });
    group.bench_function("competence_model_j20", |b| {
        b.iter(|| build_competence_model(black_box(&w.dsel), &w.kmeans, N_ACC, 20).unwrap())
    });
    let cm = w.competence(20);
    group.bench_function("export_tiny_j20", |b| {
        b.iter(|| export_tiny(&w.standardizer, black_box(&cm), &w.pool).unwrap())
    });
    group.finish();
}

criterion_group!(benches, training);
criterion_main!(benches);
