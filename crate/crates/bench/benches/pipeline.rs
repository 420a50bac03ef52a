use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use spectramut_bench::{fixture, series};
use spectramut_core::spectral::{dft_magnitude, SpectrumPlan};
use spectramut_core::{
    build_similarity_graph, mutant_spectra, run_accelerated, stratified_sample, vanilla_test, AccelConfig, Dendrogram,
    FeatureKind,
};

fn transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group("dft_magnitude");
    for len in [50, 250, 500, 512] {
        let s = series(len, len as u64);
        let plan = SpectrumPlan::new(len);
        group.bench_with_input(BenchmarkId::new("planned", len), &s, |b, s| {
            b.iter(|| plan.magnitudes(black_box(s)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("one_shot", len), &s, |b, s| {
            b.iter(|| dft_magnitude(black_box(s)).unwrap())
        });
    }
    group.finish();
}

fn analysis(c: &mut Criterion) {
    let (problem, set) = fixture(100, 100);
    let mut group = c.benchmark_group("analysis");
    for x in [1, 10, 100] {
        let sample = stratified_sample(&problem.dataset, x, 0).unwrap();
        group.bench_with_input(BenchmarkId::new("spectra", x), &sample, |b, sample| {
            b.iter(|| mutant_spectra(&set.mutants, &problem.dataset, sample, FeatureKind::Spectral).unwrap())
        });
        let spectra = mutant_spectra(&set.mutants, &problem.dataset, &sample, FeatureKind::Spectral).unwrap();
        group.bench_with_input(BenchmarkId::new("graph", x), &spectra, |b, spectra| {
            b.iter(|| build_similarity_graph(spectra).unwrap())
        });
        let graph = build_similarity_graph(&spectra).unwrap();
        group.bench_with_input(BenchmarkId::new("dendrogram", x), &graph, |b, graph| {
            b.iter(|| Dendrogram::build(graph))
        });
    }
    group.finish();
}

fn end_to_end(c: &mut Criterion) {
    let (problem, set) = fixture(100, 100);
    let mut group = c.benchmark_group("end_to_end");
    group.sample_size(20);
    group.bench_function("vanilla", |b| {
        b.iter(|| vanilla_test(&problem.model, &set.mutants, &problem.dataset).unwrap())
    });
    let config = AccelConfig::default();
    group.bench_function("dmsharp", |b| {
        b.iter(|| run_accelerated(&problem.model, &set.mutants, &problem.dataset, &config).unwrap())
    });
    group.finish();
}

criterion_group!(benches, transforms, analysis, end_to_end);
criterion_main!(benches);
