//! Sequential vs rayon scheduling of independent work: benchmark trials and
//! per-point projections.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hdm::embedding::embed_points_with;
use hdm::experiments::{sparsity_success_curve, SparsityConfig};
use hdm::gramian::h_gramian;
use hdm::lorentz::random_loid_points;
use hdm::par::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sparsity_trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("sparsity_curve");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = SparsityConfig::new(8, 2, vec![0.0, 0.2], 4, 1e-2, 1);
        cfg.execution = exec;
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| sparsity_success_curve(black_box(cfg)).unwrap())
        });
    }
    group.finish();
}

fn embedding(c: &mut Criterion) {
    let mut group = c.benchmark_group("embed_points");
    let g = h_gramian(&random_loid_points(256, 3, 7, 1.0).unwrap()).unwrap();
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| embed_points_with(black_box(&g), 3, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sparsity_trials, embedding);
criterion_main!(benches);
