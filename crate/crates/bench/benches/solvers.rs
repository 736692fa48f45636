use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use synrdp::codec::{decode, encode, sample_source};
use synrdp::rdp::{blahut_arimoto, rdp_solve};
use synrdp::SolverConfig;
use synrdp_bench::{codec_model, rd_instance};

fn bench_blahut_arimoto(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let mut group = c.benchmark_group("blahut_arimoto");
    group.sample_size(10);
    for n in [4, 16, 32] {
        let (p, delta) = rd_instance(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| blahut_arimoto(black_box(&p), &delta, -3.0, &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_rdp_solve(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let (p, delta) = rd_instance(4);
    let mut group = c.benchmark_group("rdp_solve");
    group.sample_size(10);
    for pt in [0.0, 0.02, f64::INFINITY] {
        group.bench_with_input(BenchmarkId::new("p", format!("p={pt}")), &pt, |b, &pt| {
            b.iter(|| rdp_solve(black_box(&p), &delta, 0.2, pt, &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_codec(c: &mut Criterion) {
    let m = codec_model(42);
    let xs = sample_source(&m, 100_000).unwrap();
    let bs = encode(&xs, &m).unwrap();
    c.bench_function("codec/encode_100k", |b| b.iter(|| encode(black_box(&xs), &m).unwrap()));
    c.bench_function("codec/decode_100k", |b| b.iter(|| decode(black_box(&bs), &m).unwrap()));
}

criterion_group!(benches, bench_blahut_arimoto, bench_rdp_solve, bench_codec);
criterion_main!(benches);
