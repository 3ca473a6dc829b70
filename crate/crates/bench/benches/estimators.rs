use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rdd_bench::curved;
use rdd_core::dataset::Target;
use rdd_core::locrand::{RandomizationConfig, WindowSelectionConfig};
use rdd_core::rdplot::{build_rdplot, PlotOptions};
use rdd_core::{
    estimate_sharp, fisher_test, select_bandwidth, select_window, EstimationSpec, Kernel,
    TestStatistic, Window,
};

fn bandwidth(c: &mut Criterion) {
    let mut g = c.benchmark_group("select_bandwidth");
    for n in [1_000, 10_000] {
        let (data, design) = curved(n, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                select_bandwidth(
                    black_box(&data),
                    &design,
                    1,
                    Kernel::Triangular,
                    &Target::Outcome,
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

fn sharp(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimate_sharp");
    let spec = EstimationSpec::default();
    for n in [1_000, 10_000] {
        let (data, design) = curved(n, 2);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| estimate_sharp(black_box(&data), &design, &spec).unwrap())
        });
    }
    g.finish();
}

fn fisher(c: &mut Criterion) {
    let (data, design) = curved(5_000, 3);
    let window = Window::symmetric(&data, &design, 0.05).unwrap();
    let config = RandomizationConfig::default();
    c.bench_function("fisher_test/1000_draws", |b| {
        b.iter(|| {
            fisher_test(
                black_box(&data),
                &design,
                &window,
                &Target::Outcome,
                TestStatistic::DiffMeans,
                &config,
            )
            .unwrap()
        })
    });
}

fn winselect(c: &mut Criterion) {
    let (data, design) = curved(2_000, 4);
    let mut config = WindowSelectionConfig::new(vec!["z1".into(), "z2".into()]);
    config.reps = 200;
    c.bench_function("select_window/2_covariates", |b| {
        b.iter(|| select_window(black_box(&data), &design, &config).unwrap())
    });
}

fn rdplot(c: &mut Criterion) {
    let (data, design) = curved(10_000, 5);
    let options = PlotOptions::default();
    c.bench_function("build_rdplot/10000", |b| {
        b.iter(|| build_rdplot(black_box(&data), &design, &options).unwrap())
    });
}

criterion_group!(benches, bandwidth, sharp, fisher, winselect, rdplot);
criterion_main!(benches);
