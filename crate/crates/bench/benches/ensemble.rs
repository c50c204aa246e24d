use std::hint::black_box;

use bayescombine::bcc::{bayes_combine, dawid_skene_em, SamplerConfig};
use bayescombine::detectors::nnls;
use bayescombine::evaluation::{generate_synthetic, SyntheticSpec};
use bayescombine::priors::{poisson_binomial_pmf, ConfidenceVector};
use bayescombine::{elicit_priors, run_detectors, DetectorSuite, LabeledSeries};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn pmf(c: &mut Criterion) {
    let mut group = c.benchmark_group("poisson_binomial_pmf");
    for k in [5usize, 50, 500] {
        let z = ConfidenceVector::new((0..k).map(|i| 0.5 + 0.49 * (i as f64 / k as f64)).collect()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(k), &z, |b, z| b.iter(|| poisson_binomial_pmf(black_box(z))));
    }
    group.finish();
}

fn nnls_fit(c: &mut Criterion) {
    let design: Vec<Vec<f64>> = (0..200)
        .map(|i| (0..8).map(|j| ((i * 7 + j * 13) % 17) as f64 - 8.0).collect())
        .collect();
    let targets: Vec<f64> = (0..200).map(|i| ((i * 5) % 11) as f64).collect();
    c.bench_function("nnls_200x8", |b| b.iter(|| nnls(black_box(&design), black_box(&targets)).unwrap()));
}

fn detectors(c: &mut Criterion) {
    let values: Vec<f64> = (0..1440)
        .map(|t| 100.0 + 10.0 * (2.0 * std::f64::consts::PI * t as f64 / 24.0).sin() + ((t * 37) % 11) as f64 * 0.3)
        .collect();
    let series = LabeledSeries::from_values("bench", &values).unwrap();
    let suite = DetectorSuite::default();
    let mut group = c.benchmark_group("detectors");
    group.sample_size(10);
    group.bench_function("all_four_1440", |b| b.iter(|| run_detectors(black_box(&series), &suite)));
    group.finish();
}

fn combiners(c: &mut Criterion) {
    let spec = SyntheticSpec::symmetric(2000, 0.05, &[0.9, 0.85, 0.8, 0.75, 0.5], 42);
    let data = generate_synthetic(&spec).unwrap();
    let mut group = c.benchmark_group("combiners");
    group.sample_size(10);
    group.bench_function("elicit_priors", |b| b.iter(|| elicit_priors(black_box(&data.verdicts), 0.9).unwrap()));
    group.bench_function("dawid_skene", |b| b.iter(|| dawid_skene_em(black_box(&data.verdicts), 500, 1e-8)));
    let config = SamplerConfig { iterations: 1000, burn_in: 200, ..SamplerConfig::with_seed(1) };
    group.bench_function("sampler_1000_sweeps", |b| {
        b.iter(|| bayes_combine(black_box(&data.verdicts), 0.9, &config).unwrap())
    });
    group.finish();
}

criterion_group!(benches, pmf, nnls_fit, detectors, combiners);
criterion_main!(benches);
