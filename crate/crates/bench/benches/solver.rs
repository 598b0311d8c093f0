use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sdpi_bench::{bsc, random};
use sdpi_core::oracle::verify_reduction;
use sdpi_core::{
    eta_f, post_eta, solve_binary, trace_envelope, BinaryProblem, DivergenceKind, EnvelopeGrid,
    PostConfig, SolverConfig,
};
use std::hint::black_box;

fn binary(c: &mut Criterion) {
    let ch = bsc(0.1);
    let mut group = c.benchmark_group("solve_binary");
    group.sample_size(10);
    for kind in [DivergenceKind::Kl, DivergenceKind::Chi2, DivergenceKind::Hellinger2] {
        let problem = BinaryProblem::new(ch.row(0), ch.row(1), kind).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(kind), &problem, |b, p| {
            b.iter(|| solve_binary(black_box(p), &SolverConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn channel(c: &mut Criterion) {
    let mut group = c.benchmark_group("eta_f_kl");
    group.sample_size(10);
    for n in [2, 4, 6] {
        let ch = random(n, n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &ch, |b, ch| {
            b.iter(|| eta_f(black_box(ch), DivergenceKind::Kl, 1e-6).unwrap())
        });
    }
    group.finish();
}

fn workflows(c: &mut Criterion) {
    let ch = random(3, 3, 2);
    let mut group = c.benchmark_group("workflows");
    group.sample_size(10);
    group.bench_function("envelope_3x3", |b| {
        b.iter(|| trace_envelope(black_box(&ch), DivergenceKind::Kl, 4.0, &EnvelopeGrid::default()).unwrap())
    });
    group.bench_function("verify_3x3_1e4", |b| {
        b.iter(|| verify_reduction(black_box(&ch), DivergenceKind::Kl, 10_000, 0, 1e-6).unwrap())
    });
    group.bench_function("post_3x3", |b| {
        b.iter(|| post_eta(black_box(&ch), &PostConfig::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, binary, channel, workflows);
criterion_main!(benches);
