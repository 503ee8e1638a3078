use bst_bench::{delays, grid, state};
use bst_core::hom::{pcc_curve, sample_counts};
use bst_core::phase::mask_for_jsi;
use bst_core::{
    decompose, fit_interferogram, hom_from_jsa, initial_guess, monte_carlo_schmidt,
    simulate_histogram, CurveKind, ExchangeSymmetry, FitBounds, HomCurve, HomFitParams, JsiMatrix,
    LobeDetection, StateConfig, TofsConfig,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

fn spectra(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectra");
    for n in [128, 256, 512] {
        let grid = grid(n);
        g.bench_with_input(BenchmarkId::new("synthesize", n), &grid, |b, grid| {
            b.iter(|| StateConfig::default().synthesize(black_box(grid)).unwrap())
        });
    }
    g.sample_size(10);
    for n in [128, 256, 512] {
        let jsa = state(n, 0.0);
        g.bench_with_input(BenchmarkId::new("decompose", n), &jsa, |b, jsa| {
            b.iter(|| decompose(black_box(jsa)).unwrap())
        });
    }
    g.finish();
}

fn interferometry(c: &mut Criterion) {
    let mut g = c.benchmark_group("hom");
    let jsa = state(256, 0.0);
    let tau = delays(100);
    g.bench_function("hom_from_jsa_256x100", |b| {
        b.iter(|| hom_from_jsa(black_box(&jsa), &tau).unwrap())
    });

    let (delta, sigma) = StateConfig::default().nominal_bins();
    let truth = HomFitParams::new(1000.0, 0.95, delta, sigma, 0.3);
    let model = pcc_curve(&truth, &tau).unwrap();
    let counts = sample_counts(&model, 7, 0).unwrap();
    let data = HomCurve::new(tau.clone(), counts, CurveKind::Counts).unwrap();
    g.bench_function("fit_100_points", |b| {
        b.iter(|| {
            let init = initial_guess(black_box(&data)).unwrap();
            fit_interferogram(&data, init, &FitBounds::default()).unwrap()
        })
    });
    g.finish();
}

fn measurement(c: &mut Criterion) {
    let mut g = c.benchmark_group("measurement");
    g.sample_size(10);
    let jsi = JsiMatrix::from_jsa(&state(256, 0.0));
    let cfg = TofsConfig::default();
    let pairs = 1_000_000;
    g.throughput(Throughput::Elements(pairs as u64));
    g.bench_function("tofs_histogram_1e6", |b| {
        b.iter(|| {
            simulate_histogram(black_box(&jsi), pairs, &cfg, cfg.histogram_spec(), 1).unwrap()
        })
    });

    let mask = mask_for_jsi(
        &jsi,
        ExchangeSymmetry::Antisymmetric,
        LobeDetection::default(),
    )
    .unwrap();
    let total = jsi.values().sum();
    let counts = jsi.values().map(|v| (v / total * 1.3e7).round() as u64);
    g.throughput(Throughput::Elements(100));
    g.bench_function("monte_carlo_k_100_rounds", |b| {
        b.iter(|| monte_carlo_schmidt(black_box(&counts), &mask, 100, 1).unwrap())
    });
    g.finish();
}

criterion_group!(benches, spectra, interferometry, measurement);
criterion_main!(benches);
