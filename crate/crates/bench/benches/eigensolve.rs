//! Eigensolver cost: dense QR, shift-invert Arnoldi and the stationary density.
//!
//! ```bash
//! cargo bench -p genflow-bench --bench eigensolve
//! ```

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use genflow_bench::generator;
use genflow_core::{eigs_near_zero, stationary_left_vector, EigOptions, Shift};

fn near_zero(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigs_near_zero");
    group
        .sample_size(10)
        .measurement_time(Duration::from_secs(10));
    let opts = EigOptions::default();
    for n in [256, 4096] {
        let a = generator("sine_flow", n, 3);
        group.bench_with_input(BenchmarkId::new("sine_flow", n), &a, |b, a| {
            b.iter(|| eigs_near_zero(a, 3, &opts, Shift::Auto).unwrap())
        });
    }
    let a = generator("abc", 16, 3);
    group.bench_function("abc/16", |b| {
        b.iter(|| eigs_near_zero(&a, 3, &opts, Shift::Auto).unwrap())
    });
    group.finish();
}

fn stationary(c: &mut Criterion) {
    let mut group = c.benchmark_group("stationary_density");
    group.sample_size(10);
    for n in [1024, 16384] {
        let a = generator("sine_flow", n, 3);
        group.bench_with_input(BenchmarkId::new("sine_flow", n), &a, |b, a| {
            b.iter(|| stationary_left_vector(a).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, near_zero, stationary);
criterion_main!(benches);
