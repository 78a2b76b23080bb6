use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pmdp_core::ccp::{synthesize, CcpConfig};
use pmdp_core::encode::{build_nlp, convexify, dc_split, initial_anchor, nlp_to_qcqp, SplitMethod};
use pmdp_core::gen::maze;
use pmdp_core::graph::analyze;
use pmdp_core::mc::{evaluate, InstantiatedMdp};
use pmdp_core::model::rational;
use pmdp_core::parse_spec;

fn model_check(c: &mut Criterion) {
    let mut g = c.benchmark_group("model_check");
    let spec = parse_spec("E<=100").unwrap();
    for size in [8, 16, 32] {
        let m = maze(size, size * size / 2, 0, false);
        let mut inst = InstantiatedMdp::of_pmdp(&m);
        inst.set_valuation(&vec![0.5; m.num_params()]);
        g.bench_with_input(BenchmarkId::new("value_iteration", size), &inst, |b, inst| {
            b.iter(|| evaluate(inst.matrix(), &spec, 1e-8, false).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("certified", size), &inst, |b, inst| {
            b.iter(|| evaluate(inst.matrix(), &spec, 1e-8, true).unwrap())
        });
    }
    g.finish();
}

fn encoding(c: &mut Criterion) {
    let mut g = c.benchmark_group("encoding");
    let spec = parse_spec("E<=100").unwrap();
    let m = maze(24, 100, 0, true);
    let a = analyze(&m, &spec).unwrap();
    let eps = rational(1, 100_000);
    g.bench_function("build", |b| {
        b.iter(|| {
            let nlp = build_nlp(&m, &spec, &a, &eps).unwrap();
            dc_split(&nlp_to_qcqp(&nlp), SplitMethod::Bilinear)
        })
    });
    let nlp = build_nlp(&m, &spec, &a, &eps).unwrap();
    let dc = dc_split(&nlp_to_qcqp(&nlp), SplitMethod::Bilinear);
    let anchor = initial_anchor(&nlp);
    let mut prog = convexify(&dc, &anchor, 1.0);
    g.bench_function("convexify", |b| b.iter(|| convexify(&dc, &anchor, 1.0)));
    g.bench_function("refresh", |b| b.iter(|| prog.refresh(&anchor, 2.0)));
    g.finish();
}

fn ccp(c: &mut Criterion) {
    let mut g = c.benchmark_group("ccp");
    g.sample_size(10);
    for (size, params) in [(8, 16), (16, 64)] {
        let m = maze(size, params, 0, true);
        // generous threshold: measures a short successful run
        let spec = parse_spec("E<=1000").unwrap();
        g.bench_with_input(BenchmarkId::new("maze", format!("{size}x{size}")), &m, |b, m| {
            b.iter(|| synthesize(m, &spec, &CcpConfig::default()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, model_check, encoding, ccp);
criterion_main!(benches);
