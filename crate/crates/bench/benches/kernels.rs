use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qmh_bench::{oracle, overlap_pair, ring};
use qmh_core::annealing::{exact_phase_gate, nae_overlap, omega_pi3, pi3_amplify, NaeConfig};
use qmh_core::inference::{damped_sinusoid, damped_sinusoid_dft, direct_dft, synth_gw_instance, GwParams};
use qmh_core::markov::build_transition_matrix;
use qmh_core::qmci::{qmci_mean, QmciMode};
use qmh_core::qsim::{build_walk_operator, verify_phase_gap, AcceptanceSource, RegisterLayout};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn walk(c: &mut Criterion) {
    let mut g = c.benchmark_group("walk");
    for n in [4, 8, 16] {
        let inst = ring(n);
        let layout = RegisterLayout::new(&inst.space, &inst.kernel).unwrap();
        g.bench_with_input(BenchmarkId::new("build", n), &n, |b, _| {
            b.iter(|| build_walk_operator(&layout, &inst.kernel, AcceptanceSource::Exact(&inst.model)).unwrap())
        });
        let op = build_walk_operator(&layout, &inst.kernel, AcceptanceSource::Exact(&inst.model)).unwrap();
        let chain = build_transition_matrix(&inst.model, &inst.kernel).unwrap();
        g.bench_with_input(BenchmarkId::new("phase-gap", n), &n, |b, _| b.iter(|| verify_phase_gap(&op, &chain).unwrap()));
    }
    g.finish();
}

fn amplify(c: &mut Criterion) {
    let (a, t) = overlap_pair(0.3, 64);
    let rs = exact_phase_gate(&a, omega_pi3()).unwrap();
    let rt = exact_phase_gate(&t, omega_pi3()).unwrap();
    let mut g = c.benchmark_group("amplify");
    for m in [1, 3, 5] {
        g.bench_with_input(BenchmarkId::new("pi3", m), &m, |b, &m| b.iter(|| pi3_amplify(black_box(&a), &rs, &rt, m)));
    }
    let cfg = NaeConfig::new(0.2, 0.1);
    g.bench_function("nae", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        b.iter(|| nae_overlap(&a, &rs, &rt, &cfg, &mut rng).unwrap())
    });
    g.finish();
}

fn qmci(c: &mut Criterion) {
    let o = oracle(4, 16);
    let eps = 0.25 * o.sigma();
    let mut g = c.benchmark_group("qmci");
    g.bench_function("faithful", |b| b.iter(|| qmci_mean(&o, 1, eps, 0.1, QmciMode::Faithful, 3).unwrap()));
    g.bench_function("emulated", |b| b.iter(|| qmci_mean(&o, 1, eps, 0.1, QmciMode::Emulated, 3).unwrap()));
    g.finish();
}

fn gw(c: &mut Criterion) {
    let mut g = c.benchmark_group("gw");
    for m in [256, 1024] {
        let dt = 1.0 / m as f64;
        let x = damped_sinusoid(40.0, 0.25, dt, m);
        g.bench_with_input(BenchmarkId::new("direct-dft", m), &m, |b, _| b.iter(|| direct_dft(black_box(&x), dt)));
        g.bench_with_input(BenchmarkId::new("closed-form-dft", m), &m, |b, &m| {
            b.iter(|| (0..=m / 2).map(|k| damped_sinusoid_dft(40.0, 0.25, dt, m, k)).collect::<Vec<_>>())
        });
        g.bench_with_input(BenchmarkId::new("synth", m), &m, |b, &m| b.iter(|| synth_gw_instance(&GwParams::standard(m, 7)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, walk, amplify, qmci, gw);
criterion_main!(benches);
