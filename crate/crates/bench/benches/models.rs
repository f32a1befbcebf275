use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use emodel_core::dataio::{EmbeddedDatasets, MetricRecord};
use emodel_core::eval::{reconstruct_score_multisets, EvalMode};
use emodel_core::monitor::{WindowAggregator, WindowSpec};
use emodel_core::{
    derive_bias, evaluate_models, CodecProfile, Estimator, GridSpec, ModelKind, NetworkCondition,
    SubjectiveSurface, TermSet,
};

fn estimates(c: &mut Criterion) {
    let est = Estimator::default();
    let cond = NetworkCondition::new(3.0, 400.0).unwrap();
    let mut g = c.benchmark_group("estimate");
    for model in ModelKind::ALL {
        g.bench_function(model.as_str(), |b| {
            b.iter(|| est.estimate(model, black_box(&cond), false).unwrap())
        });
    }
    g.finish();
}

fn fitting(c: &mut Criterion) {
    let profile = CodecProfile::g729();
    let grid = GridSpec::default();
    let fine = GridSpec::new(
        (0..=100).map(|k| k as f64 * 0.1).collect(),
        (0..=80).map(|k| k as f64 * 5.0).collect(),
    )
    .unwrap();
    let mut g = c.benchmark_group("derive_bias");
    g.bench_function("poly23 11x9", |b| {
        b.iter(|| {
            derive_bias(
                &SubjectiveSurface::THAI_G729,
                &profile,
                black_box(&grid),
                &TermSet::poly23(),
            )
            .unwrap()
        })
    });
    g.bench_function("poly33 101x81", |b| {
        b.iter(|| {
            derive_bias(
                &SubjectiveSurface::THAI_G729,
                &profile,
                black_box(&fine),
                &TermSet::poly33(),
            )
            .unwrap()
        })
    });
    g.finish();
}

fn evaluation(c: &mut Criterion) {
    let est = Estimator::default();
    let sets = EmbeddedDatasets::get().test_sets();
    let models = [ModelKind::Simplified, ModelKind::Enhanced];
    let mut g = c.benchmark_group("evaluate");
    g.bench_function("reconstruct n=7", |b| {
        b.iter(|| reconstruct_score_multisets(black_box(3.43), black_box(0.79), 7).unwrap())
    });
    g.bench_function("scenario-mean", |b| {
        b.iter(|| evaluate_models(&sets, &models, &est, EvalMode::ScenarioMean).unwrap())
    });
    g.bench_function("per-record-bounds", |b| {
        b.iter(|| evaluate_models(&sets, &models, &est, EvalMode::PerRecordBounds).unwrap())
    });
    g.finish();
}

fn monitoring(c: &mut Criterion) {
    let records: Vec<MetricRecord> = (0..10_000)
        .map(|k| {
            MetricRecord::parse_line(&format!(
                "{{\"ts\":{k},\"loss_percent\":{},\"delay_ms\":{}}}",
                (k % 11) as f64,
                (k % 401) as f64
            ))
            .unwrap()
        })
        .collect();
    c.bench_function("monitor 10k records", |b| {
        b.iter(|| {
            let mut agg = WindowAggregator::new(WindowSpec::Records(50)).unwrap();
            let mut closed = 0;
            for r in &records {
                closed += agg.push(r).is_some() as usize;
            }
            black_box(closed + agg.finish().len())
        })
    });
}

criterion_group!(benches, estimates, fitting, evaluation, monitoring);
criterion_main!(benches);
