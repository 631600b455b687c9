//! Benchmarks for the hot loops of `lsv-core`.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{BenchmarkId, Criterion, Throughput};

use lsv_core::coupling::{simulate_coupling_time, CouplingConfig, GeometricShim};
use lsv_core::lsv::left_inverse;
use lsv_core::rng::replica_rng;
use lsv_core::stats::{step_refined, Cocycle};
use lsv_core::{EnvironmentPath, Grid, ReturnStructure, UlamCache, UlamMatrix};

pub fn ulam(c: &mut Criterion) {
    let mut g = c.benchmark_group("ulam");
    for n in [1024, 4096] {
        let grid = Arc::new(Grid::refined(n, 2.0).unwrap());
        g.bench_with_input(BenchmarkId::new("assemble", n), &grid, |b, grid| {
            b.iter(|| UlamMatrix::new(black_box(0.5), Arc::clone(grid)).unwrap())
        });
        let m = UlamMatrix::new(0.5, Arc::clone(&grid)).unwrap();
        let mass = grid.widths().to_vec();
        let mut out = vec![0.0; n];
        g.throughput(Throughput::Elements(m.nnz() as u64));
        g.bench_function(BenchmarkId::new("push_mass", n), |b| {
            b.iter(|| m.push_mass(black_box(&mass), &mut out))
        });
    }
    g.finish();
    c.bench_function("left_inverse", |b| {
        b.iter(|| left_inverse(black_box(0.5), black_box(1e-3)))
    });
}

pub fn operators(c: &mut Criterion) {
    let mut g = c.benchmark_group("operators");
    g.sample_size(10);
    let path = EnvironmentPath::constant(0.5, 1000, 500);
    g.bench_function("cocycle_4096_pull1000", |b| {
        b.iter(|| Cocycle::new(path.clone(), Grid::refined(4096, 2.0).unwrap(), 0, 400, 1000).unwrap())
    });
    let cache = Arc::new(UlamCache::new(Grid::refined(4096, 2.0).unwrap()));
    let c0 = Cocycle::with_cache(path.clone(), cache, 0, 400, 1000).unwrap();
    let mut f = c0.grid().midpoints();
    let mut scratch = vec![0.0; f.len()];
    g.bench_function("normalized_push_4096", |b| {
        b.iter(|| c0.push(0, &mut f, &mut scratch).unwrap())
    });
    g.bench_function("return_structure_500", |b| {
        b.iter(|| ReturnStructure::build(&path, 0, 0, black_box(500)).unwrap())
    });
    g.finish();
}

pub fn orbits(c: &mut Criterion) {
    let mut g = c.benchmark_group("orbits");
    let steps = 10_000u64;
    g.throughput(Throughput::Elements(steps));
    for beta in [0.0, 0.5] {
        g.bench_with_input(BenchmarkId::new("step_refined", beta), &beta, |b, &beta| {
            let mut rng = replica_rng(1, 0);
            b.iter(|| {
                let mut x = 0.3;
                for _ in 0..steps {
                    x = step_refined(beta, x, &mut rng);
                }
                x
            })
        });
    }
    g.finish();
}

pub fn coupling(c: &mut Criterion) {
    let cfg = CouplingConfig {
        theta: 0.25,
        horizon: 400,
        n_samples: 100_000,
        seed: 3,
        fit_window: (1.0, 100.0),
    };
    let mut g = c.benchmark_group("coupling");
    g.sample_size(10);
    g.bench_function("geometric_shim_1e5", |b| {
        b.iter(|| simulate_coupling_time(&GeometricShim { q: 0.6 }, &cfg).unwrap())
    });
    g.finish();
}
