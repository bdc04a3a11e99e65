//! Solver costs: exact support enumeration at small sizes versus the
//! truncated iterative solver at the sizes the simulations use.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use std::hint::black_box;

use sparse_subspace::covariance::{sample_covariance, sample_gaussian, spiked_covariance};
use sparse_subspace::estimators::{estimate_exact, estimate_iterative, SparsityConstraint};
use sparse_subspace::harness::make_truth;
use sparse_subspace::SolverOptions;

fn spiked_sample(p: usize, d: usize, r0: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let truth = make_truth(p, d, r0, seed).unwrap();
    let model = spiked_covariance(&truth, 1.0).unwrap();
    let x = sample_gaussian(&model, n, seed ^ 0xBEEF).unwrap();
    sample_covariance(&x).unwrap()
}

fn bench_exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate_exact");
    group.sample_size(20);
    for (p, r0) in [(10usize, 3usize), (12, 4)] {
        let s = spiked_sample(p, 2, r0, 200, 21);
        let constraint = SparsityConstraint::row(0.0, r0 as f64).unwrap();
        let id = BenchmarkId::from_parameter(format!("p{p}_r{r0}"));
        group.bench_with_input(id, &p, |bench, _| {
            bench.iter(|| estimate_exact(black_box(&s), 2, &constraint).unwrap())
        });
    }
    group.finish();
}

fn bench_iterative(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate_iterative");
    group.sample_size(20);
    for (p, r0) in [(64usize, 6usize), (128, 8)] {
        let s = spiked_sample(p, 2, r0, 1000, 22);
        let constraint = SparsityConstraint::row(0.0, r0 as f64).unwrap();
        let opts = SolverOptions::default();
        let id = BenchmarkId::from_parameter(format!("p{p}_r{r0}"));
        group.bench_with_input(id, &p, |bench, _| {
            bench.iter(|| estimate_iterative(black_box(&s), 2, &constraint, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_exact, bench_iterative);
criterion_main!(benches);
