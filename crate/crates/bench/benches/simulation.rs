use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use lcris_bench::{env_config, snapshot_stream};
use lcris_core::agent::{Activation, Grads, Mlp};
use lcris_core::baselines::{optimal_controller, realistic_controller};
use lcris_core::env::{Action, Env};
use lcris_core::lc_dynamics::PanelState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEPS: usize = 256;

fn channel(c: &mut Criterion) {
    let cfg = env_config(STEPS);
    let mut stream = snapshot_stream(&cfg, 7).unwrap();
    let mut slot = 0;
    c.bench_function("snapshot_at", |b| {
        b.iter(|| {
            slot = (slot + 1) % STEPS;
            black_box(stream.snapshot_at(slot).unwrap())
        })
    });

    let snap = stream.snapshot_at(100).unwrap();
    c.bench_function("optimal_controller", |b| {
        b.iter(|| black_box(optimal_controller(&snap, &cfg).unwrap()))
    });

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let panel = PanelState::random(cfg.spec.columns(), cfg.lc, &mut rng).unwrap();
    c.bench_function("realistic_controller", |b| {
        b.iter_batched(
            || panel.clone(),
            |mut p| black_box(realistic_controller(&snap, &mut p, &cfg).unwrap()),
            BatchSize::SmallInput,
        )
    });
}

fn networks(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = Mlp::init(&[60, 256, 256, 30], Activation::Relu, Activation::Tanh, 1e-3, &mut rng).unwrap();
    let x: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
    c.bench_function("mlp_forward_256x256", |b| {
        b.iter(|| black_box(net.forward(&x).unwrap()))
    });

    let trace = net.forward_trace(&x).unwrap();
    let upstream = vec![1.0; 30];
    let mut grads = Grads::zeros_like(&net);
    c.bench_function("mlp_backward_256x256", |b| {
        b.iter(|| black_box(net.backward(&trace, &upstream, Some(&mut grads), 0)))
    });
}

fn environment(c: &mut Criterion) {
    let cfg = env_config(STEPS);
    let mut env = Env::new(cfg).unwrap();
    env.reset(11).unwrap();
    let action = Action(vec![0.1; env.action_dim()]);
    let mut done = false;
    c.bench_function("env_step", |b| {
        b.iter(|| {
            if done {
                env.reset(11).unwrap();
            }
            let out = env.step(&action).unwrap();
            done = out.done;
            black_box(out.reward)
        })
    });
}

criterion_group!(benches, channel, networks, environment);
criterion_main!(benches);
