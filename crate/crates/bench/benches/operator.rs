use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use funceq_bench::{instance, EXPRESSIONS};
use funceq_core::hypotheses::HypothesisReport;
use funceq_core::solver::neumann_solve;
use funceq_core::{differentiate, parse};

fn apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply");
    for m in [1024, 4096, 16384] {
        for name in ["sec5", "ex4_3"] {
            let spec = instance(name, m);
            let h = spec.g().clone();
            group.bench_with_input(BenchmarkId::new(name, m), &h, |b, h| {
                b.iter(|| spec.apply(black_box(h)).unwrap())
            });
        }
    }
    group.finish();
}

fn solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("neumann_solve");
    for (name, hint) in [("sec5", Some(0.8)), ("ex3_7", None), ("ex3_3", None)] {
        let spec = instance(name, 4096);
        group.bench_function(name, |b| b.iter(|| neumann_solve(&spec, 1e-6, 400, hint).unwrap()));
    }
    group.finish();
}

fn hypotheses(c: &mut Criterion) {
    let spec = instance("ex3_7", 4096);
    c.bench_function("hypothesis_report/ex3_7", |b| {
        b.iter(|| HypothesisReport::check(black_box(&spec)).unwrap())
    });
}

fn expressions(c: &mut Criterion) {
    let mut group = c.benchmark_group("expr");
    for (i, src) in EXPRESSIONS.iter().enumerate() {
        group.bench_with_input(BenchmarkId::new("parse", i), src, |b, s| {
            b.iter(|| parse(black_box(s)).unwrap())
        });
        let e = parse(src).unwrap();
        group.bench_with_input(BenchmarkId::new("differentiate", i), &e, |b, e| {
            b.iter(|| differentiate(black_box(e)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, apply, solve, hypotheses, expressions);
criterion_main!(benches);
