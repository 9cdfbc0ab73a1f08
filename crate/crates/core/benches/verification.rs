//! Criterion benchmarks for the verification core, comparing the default
//! rayon data-parallel execution against a sequential baseline (a one-thread
//! pool) on the same workloads.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use onv_core::branching::{coverage_rate, reach_and_branch, VerifyLimits};
use onv_core::engine::{AccelFlags, EngineConfig, OnlineEngine};
use onv_core::geometry::{IntervalBox, Polytope};
use onv_core::network::{gradient_step, Activation, Layer, Network};
use onv_core::reachability::{reach_interval, CheckOpts, OutputSpec};

fn random_network(dims: &[usize], gain: f64, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    for (i, w) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let scale = gain / (fan_in as f64).sqrt();
        let weights = Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-scale..=scale));
        let bias = Array1::from_shape_fn(fan_out, |_| rng.gen_range(-0.05..=0.05));
        let activation = if i + 1 == dims.len() - 1 {
            Activation::Linear
        } else {
            Activation::Relu
        };
        layers.push(Layer::new(weights, bias, activation).unwrap());
    }
    Network::new(layers).unwrap()
}

fn bench_input(dim: usize) -> IntervalBox {
    IntervalBox::new(vec![-1.0; dim], vec![1.0; dim]).unwrap()
}

/// Runs `f` on a rayon pool with the given thread count, so a one-thread
/// pool serves as the sequential reference point.
fn with_threads<R>(threads: usize, f: impl FnOnce() -> R + Send) -> R
where
    R: Send,
{
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn bench_reach_batch(c: &mut Criterion) {
    let net = random_network(&[9, 50, 50, 9], 1.0, 7);
    let input = bench_input(9);
    let mut group = c.benchmark_group("reach_interval_batch_1k");
    for &threads in &[1usize, 0] {
        let label = if threads == 1 { "sequential" } else { "parallel" };
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| {
                let run = || {
                    use rayon::prelude::*;
                    (0..1000u32)
                        .into_par_iter()
                        .map(|_| reach_interval(&net, &input).unwrap().output().hi()[0])
                        .sum::<f64>()
                };
                if threads == 1 {
                    with_threads(1, run)
                } else {
                    run()
                }
            })
        });
    }
    group.finish();
}

fn bench_reach_and_branch(c: &mut Criterion) {
    let net = random_network(&[4, 32, 32, 2], 1.6, 11);
    let input = Polytope::from_box(&bench_input(4));
    let spec = OutputSpec::from_box(&IntervalBox::new(vec![-8.0, -8.0], vec![8.0, 8.0]).unwrap());
    let limits = VerifyLimits {
        max_branches: 128,
        ..VerifyLimits::default()
    };
    let opts = CheckOpts::default();
    let mut group = c.benchmark_group("reach_and_branch_128");
    group.sample_size(20);
    for &threads in &[1usize, 0] {
        let label = if threads == 1 { "sequential" } else { "parallel" };
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| {
                let run = || reach_and_branch(&input, &net, &spec, &limits, &opts).unwrap().1.len();
                if threads == 1 {
                    with_threads(1, run)
                } else {
                    run()
                }
            })
        });
    }
    group.finish();
}

fn bench_coverage(c: &mut Criterion) {
    let net = random_network(&[4, 32, 32, 2], 1.6, 11);
    let input = Polytope::from_box(&bench_input(4));
    let spec = OutputSpec::from_box(&IntervalBox::new(vec![-8.0, -8.0], vec![8.0, 8.0]).unwrap());
    let limits = VerifyLimits {
        max_branches: 128,
        ..VerifyLimits::default()
    };
    let (_, store) = reach_and_branch(&input, &net, &spec, &limits, &CheckOpts::default()).unwrap();
    let mut group = c.benchmark_group("coverage_10k_samples");
    group.sample_size(30);
    for &threads in &[1usize, 0] {
        let label = if threads == 1 { "sequential" } else { "parallel" };
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| {
                let run = || coverage_rate(&store, &input, 10_000, 42).unwrap();
                if threads == 1 {
                    with_threads(1, run)
                } else {
                    run()
                }
            })
        });
    }
    group.finish();
}

fn bench_online_fine_tuning(c: &mut Criterion) {
    // Fine-tuning stream: last-layer gradient steps with BMW+INN+IC against
    // recompute-from-scratch, both under the default pool.
    let dims = [6usize, 40, 40, 4];
    let net0 = random_network(&dims, 1.2, 3);
    let input = Polytope::from_box(&bench_input(6));
    let spec = OutputSpec::from_box(&IntervalBox::new(vec![-30.0; 4], vec![30.0; 4]).unwrap());
    let mut nets = vec![net0.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let prev = nets.last().unwrap();
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let mut y = prev.forward(&x).unwrap();
        for v in y.iter_mut() {
            *v += rng.gen_range(-0.1..=0.1);
        }
        nets.push(gradient_step(prev, &x, &y, 1e-3, true).unwrap());
    }
    let mut group = c.benchmark_group("online_fine_tuning_20_steps");
    group.sample_size(10);
    for (label, accel) in [
        ("baseline", AccelFlags::none()),
        (
            "bmw_inn_ic",
            AccelFlags {
                bmw: true,
                inn: true,
                ic: true,
                ..AccelFlags::none()
            },
        ),
    ] {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| {
                let cfg = EngineConfig {
                    accel,
                    coverage_samples: 500,
                    limits: VerifyLimits {
                        max_branches: 64,
                        ..VerifyLimits::default()
                    },
                    ..EngineConfig::default()
                };
                let mut engine = OnlineEngine::new(cfg);
                let mut acc = 0u32;
                for (t, net) in nets.iter().enumerate() {
                    let report = engine.step(t, &input, net, &spec).unwrap();
                    acc += report.counts.recomputed as u32;
                }
                acc
            })
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_reach_batch,
    bench_reach_and_branch,
    bench_coverage,
    bench_online_fine_tuning
);
criterion_main!(benches);
