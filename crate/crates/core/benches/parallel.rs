//! Sequential against data-parallel execution of the three batched kernels:
//! dichotomy sweeps, window certification and exhaustive cut enumeration.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lapflow::analysis::{dichotomy_sweep, SweepOptions};
use lapflow::graph::{certify_cut_balance_with, certify_windows, GraphSignal, WeightedDigraph, WindowCheck};
use lapflow::par::Execution;
use lapflow::protocols::consensus_field;
use lapflow::scenario::{generate, GeneratorKind, GeneratorSpec};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn usc_signal(n: usize, periods: usize) -> GraphSignal {
    let mut spec = GeneratorSpec::new(GeneratorKind::UscByConstruction, n);
    spec.periods = periods;
    generate(&spec, 7).unwrap().signal
}

fn sweep(c: &mut Criterion) {
    let field = consensus_field(usc_signal(8, 10), 1);
    let initial: Vec<Vec<f64>> = (0..16)
        .map(|r| (0..8).map(|i| ((r * 8 + i) as f64 * 0.37).sin() * 5.0).collect())
        .collect();
    let mut group = c.benchmark_group("dichotomy_sweep");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = SweepOptions {
            horizon: 20.0,
            record_every: 100,
            execution,
            ..SweepOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| dichotomy_sweep(&field, black_box(&initial), &[], &opts).unwrap())
        });
    }
    group.finish();
}

fn windows(c: &mut Criterion) {
    let signal = usc_signal(10, 50);
    let mut group = c.benchmark_group("usc_windows");
    for (name, execution) in MODES {
        let check = WindowCheck {
            stride: Some(0.05),
            execution,
            ..WindowCheck::usc(4.0, 0.5, 200.0)
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| certify_windows(black_box(&signal), &check).unwrap())
        });
    }
    group.finish();
}

fn cuts(c: &mut Criterion) {
    let n = 18;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 + ((i * 7 + j * 3) % 5) as f64 * 0.1 }).collect())
        .collect();
    let g = WeightedDigraph::from_rows(&rows).unwrap();
    let mut group = c.benchmark_group("cut_balance");
    group.sample_size(10);
    for (name, execution) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| certify_cut_balance_with(black_box(&g), 2.0, execution).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep, windows, cuts);
criterion_main!(benches);
