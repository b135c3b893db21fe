//! Parallel vs sequential builds of the data-parallel stages: cost-matrix
//! assembly (one BFS per location) and batch instance solving.
//!
//! Run with `cargo bench -p mrtapf`. The parallel variants only appear in
//! builds with the `parallel` feature (on by default); on a single
//! hardware thread expect parity rather than speedup.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use mrtapf::bench::{run_bench_seq, BenchConfig};
use mrtapf::dist::build_cost_matrix_seq;
use mrtapf::grid::generate_instance;

#[cfg(feature = "parallel")]
use mrtapf::bench::run_bench;
#[cfg(feature = "parallel")]
use mrtapf::dist::build_cost_matrix_par;

fn cost_matrix(c: &mut Criterion) {
    let instance = generate_instance(32, 32, 0.40, 20, 40, 42).unwrap();
    let mut group = c.benchmark_group("cost_matrix_32x32_n20_m40");
    group.bench_function("sequential", |b| {
        b.iter(|| build_cost_matrix_seq(black_box(&instance)).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| build_cost_matrix_par(black_box(&instance)).unwrap())
    });
    group.finish();
}

fn batch_solve(c: &mut Criterion) {
    let config = BenchConfig {
        robot_counts: vec![3],
        goal_counts: vec![6],
        instances_per_cell: 4,
        map_width: 16,
        map_height: 16,
        obstacle_ratio: 0.25,
        time_limit_seconds: 30.0,
        seed_base: 11,
        ..Default::default()
    };
    let mut group = c.benchmark_group("batch_solve_16x16_n3_m6_x4");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| run_bench_seq(black_box(&config), None, false).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| run_bench(black_box(&config), None, false).unwrap())
    });
    group.finish();
}

criterion_group!(benches, cost_matrix, batch_solve);
criterion_main!(benches);
