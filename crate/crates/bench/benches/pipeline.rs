use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;

use stcast_core::causal::{self, DesignOptions, InstrumentSet, TargetTransform};
use stcast_core::metrics;
use stcast_core::probmodel::{self, ForecastModel, ModelConfig, SpatialCoupling};
use stcast_core::spatial::{Region, RegionSet, SpatialMatrix};
use stcast_core::synth::{self, GeneratorSpec};

fn spatial(c: &mut Criterion) {
    let regions = RegionSet::new(
        (0..200)
            .map(|i| Region::new(format!("r{i}"), -60.0 + (i as f64 * 0.61) % 120.0, -170.0 + (i as f64 * 1.7) % 340.0))
            .collect(),
    )
    .unwrap();
    c.bench_function("spatial_matrix_200", |b| b.iter(|| SpatialMatrix::build(black_box(&regions), 1.0).unwrap()));
}

fn estimation(c: &mut Criterion) {
    let sim = synth::generate(&GeneratorSpec::default()).unwrap();
    c.bench_function("estimate_n6_t300", |b| {
        b.iter(|| {
            causal::estimate(black_box(&sim.panel), &sim.spatial, DesignOptions::default(), InstrumentSet::SpatialLags)
                .unwrap()
        })
    });
}

fn model_setup() -> (ForecastModel, causal::AdjustedPanel, SpatialCoupling) {
    let sim = synth::generate(&GeneratorSpec::default()).unwrap();
    let est = causal::estimate(&sim.panel, &sim.spatial, DesignOptions::default(), InstrumentSet::SpatialLags).unwrap();
    let adjusted = causal::adjust(&sim.panel, &est, &sim.spatial).unwrap();
    let ids = sim.panel.region_ids().to_vec();
    let cfg = ModelConfig {
        epochs: 1,
        ..ModelConfig::default()
    };
    let model = ForecastModel::new(cfg, ids.clone(), TargetTransform::identity(ids.len())).unwrap();
    (model, adjusted, SpatialCoupling::new(&sim.spatial, est.rho))
}

fn training(c: &mut Criterion) {
    let (model, adjusted, coupling) = model_setup();
    let mut group = c.benchmark_group("model");
    group.sample_size(10);
    group.bench_function("train_epoch_n6_t300", |b| {
        b.iter(|| {
            let mut m = model.clone();
            m.fit(black_box(&adjusted)).unwrap()
        })
    });
    group.bench_function("forecast_100_paths", |b| {
        b.iter(|| probmodel::forecast(&model, black_box(&adjusted), &coupling, None).unwrap())
    });
    group.finish();
}

fn scoring(c: &mut Criterion) {
    let samples: Vec<f64> = (0..1000).map(|k| ((k * 7919) % 1000) as f64 / 100.0).collect();
    c.bench_function("crps_1000_samples", |b| b.iter(|| metrics::crps_from_samples(black_box(&samples), 3.3).unwrap()));
    let paths: Vec<Vec<f64>> = (0..100).map(|k| (0..60).map(|j| ((k * 31 + j * 17) % 97) as f64).collect()).collect();
    let obs = DMatrix::from_element(1, 60, 40.0);
    c.bench_function("energy_100_paths_dim60", |b| {
        b.iter(|| metrics::energy_score(black_box(&paths), obs.as_slice()).unwrap())
    });
}

criterion_group!(benches, spatial, estimation, training, scoring);
criterion_main!(benches);
