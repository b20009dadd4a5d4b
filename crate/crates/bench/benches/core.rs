use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use schedtune::cem::{elite_update, init_distribution, policy_forward};
use schedtune::sim::simulate;
use schedtune::{EnvConfig, Environment, ParameterSet, PolicyShape, Scenario};

fn session(c: &mut Criterion) {
    let scenario = Scenario::default_three_ue();
    let params = ParameterSet::sme_default();
    let mut g = c.benchmark_group("session");
    g.sample_size(10);
    g.bench_function("simulate_1s", |b| {
        b.iter(|| {
            let mut slots = 0u64;
            simulate(&scenario, &params, black_box(7), 1.0, |_| slots += 1).unwrap();
            slots
        })
    });
    let env = Environment::new(EnvConfig {
        session_duration_s: 2.0,
        x_seconds: 0,
        y_seconds: 0,
        ..EnvConfig::default()
    })
    .unwrap();
    g.bench_function("env_step_2s", |b| {
        b.iter(|| env.step(&params, black_box(3)).unwrap().reward)
    });
    g.finish();
}

fn policy(c: &mut Criterion) {
    let shape = PolicyShape::default();
    let dist = init_distribution(&shape, 1);
    let state: Vec<f64> = (0..shape.input_dim).map(|i| (i as f64 * 0.37).sin()).collect();
    c.bench_function("policy_forward", |b| {
        b.iter(|| policy_forward(&shape, black_box(&dist.mean), black_box(&state)).unwrap())
    });
}

fn refit(c: &mut Criterion) {
    let shape = PolicyShape::default();
    let dist = init_distribution(&shape, 2);
    let scored: Vec<(Vec<f64>, f64)> = (0..50)
        .map(|i| {
            let w = dist.mean.iter().map(|m| m + i as f64 * 1e-3).collect();
            (w, (i as f64 * 0.7).cos())
        })
        .collect();
    c.bench_function("elite_update_pop50", |b| {
        b.iter(|| elite_update(&dist, black_box(&scored), 0.2, 1e-3).unwrap())
    });
}

criterion_group!(benches, session, policy, refit);
criterion_main!(benches);
