//! Shot throughput of the parallel and sequential shot loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ghostsim::config::{Config, EstimatorKind};
use ghostsim::experiment::{ExecutionMode, Experiment};
use std::hint::black_box;

fn small_config() -> Config {
    let mut c = Config::reference();
    c.grid.nx = 128;
    c.grid.nt = 16;
    c.grid.extent_x = 128.0 * 0.225;
    c.grid.window_t = 8.0;
    c.solver.nz = 50;
    c.object.width = 5.0;
    c.object.separation = 13.0;
    c.object.offset = 3.0;
    c.experiment.estimator = EstimatorKind::Convolution;
    c
}

fn shots(c: &mut Criterion) {
    let e = Experiment::from_config(small_config()).expect("bench config");
    let mut group = c.benchmark_group("shots");
    group.sample_size(10);
    for (name, mode) in [("sequential", ExecutionMode::Sequential), ("parallel", ExecutionMode::Parallel)] {
        group.bench_with_input(BenchmarkId::new(name, 32), &mode, |b, &mode| {
            b.iter(|| black_box(e.run(32, mode, None).expect("run")))
        });
    }
    group.finish();
}

criterion_group!(benches, shots);
criterion_main!(benches);
