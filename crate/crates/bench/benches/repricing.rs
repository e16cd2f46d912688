use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use trisk_core::aggregate;
use trisk_core::calib::{self, default_calibration};
use trisk_core::ingest::builtin;
use trisk_core::risk::{self, RiskConfig};
use trisk_core::synth::{generate_universe, SynthConfig};

fn assess(c: &mut Criterion) {
    let scenario = builtin::delayed_transition();
    let base = default_calibration();
    let config = RiskConfig::default();
    let mut group = c.benchmark_group("assess");
    group.sample_size(10);
    for funds in [200, 1000] {
        let universe = generate_universe(&SynthConfig {
            funds,
            ..SynthConfig::default()
        });
        group.throughput(Throughput::Elements(universe.positions.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(funds), &universe, |b, u| {
            b.iter(|| {
                let a = risk::assess(u, &scenario, &base, &config).unwrap();
                aggregate::aggregate_funds(u, &a.results, &scenario).unwrap()
            })
        });
    }
    group.finish();
}

fn calibration(c: &mut Criterion) {
    let cps = trisk_core::synth::calibration_counterparties(&default_calibration(), 1).unwrap();
    let universe = trisk_core::Universe::new(vec![], vec![], vec![], cps).unwrap();
    let samples = calib::collect_samples(&universe);
    c.bench_function("calibrate_all", |b| {
        b.iter(|| calib::calibrate_all(black_box(&samples)).unwrap())
    });
}

fn kernels(c: &mut Criterion) {
    let cal = &default_calibration().0[&trisk_core::SegmentCode::D35];
    c.bench_function("ci_multiplier", |b| {
        b.iter(|| risk::ci_multiplier(black_box(Some(3696.8)), cal))
    });
    c.bench_function("bond_sensitivities", |b| {
        b.iter(|| risk::bond_sensitivities(black_box(7.5), black_box(0.031)))
    });
}

criterion_group!(benches, assess, calibration, kernels);
criterion_main!(benches);
