use std::hint::black_box;
use std::path::{Path, PathBuf};

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use irm_core::calibrate::{calibrate, CalibrationFile, SearchSpace};
use irm_core::config::RunConfig;
use irm_core::engine;
use irm_core::pid::{update_and_rate, PidState};
use irm_core::{Backend, Decimal, Reference, Scalar};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn d(s: &str) -> Decimal {
    s.parse().unwrap()
}

fn numerics(c: &mut Criterion) {
    let (base, n) = (d("0.7275"), d("6.8"));
    c.bench_function("pow/fixed", |b| b.iter(|| black_box(base).pow(black_box(n)).unwrap()));
    let (rb, rn) = (Reference::from_decimal(base), Reference::from_decimal(n));
    c.bench_function("pow/reference", |b| b.iter(|| black_box(&rb).pow(black_box(&rn)).unwrap()));
    c.bench_function("mul/fixed", |b| b.iter(|| black_box(base).checked_mul(black_box(n)).unwrap()));
}

fn controller(c: &mut Criterion) {
    let cfg = RunConfig::load(&configs().join("fig5.json")).unwrap();
    let pid = match &cfg.strategies[0].model {
        irm_core::IrmKind::Pid(p) => p.clone(),
        other => panic!("fig5 leads with a pid strategy, found {}", other.label()),
    };
    let warm = (1..=60u64).fold(PidState::default(), |s, i| {
        update_and_rate(&pid, &s, &d("0.8"), i * 3600).unwrap().0
    });
    c.bench_function("update_and_rate/fixed", |b| {
        b.iter(|| update_and_rate(&pid, black_box(&warm), &d("0.8"), 61 * 3600).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let fig5 = RunConfig::load(&configs().join("fig5.json")).unwrap();
    c.bench_function("run/fig5/fixed", |b| {
        b.iter(|| engine::run(&fig5.strategies, &fig5.scenario, Backend::Fixed).unwrap())
    });
    let baselines = RunConfig::load(&configs().join("baselines.json")).unwrap();
    c.bench_function("run/baselines/fixed", |b| {
        b.iter(|| engine::run(&baselines.strategies, &baselines.scenario, Backend::Fixed).unwrap())
    });
    let mut group = c.benchmark_group("slow");
    group.sample_size(10);
    group.bench_function("run/fig5/reference", |b| {
        b.iter(|| engine::run(&fig5.strategies, &fig5.scenario, Backend::Reference).unwrap())
    });
    group.finish();
}

fn calibration(c: &mut Criterion) {
    let file = CalibrationFile::load(&configs().join("calibration/fig4.json")).unwrap();
    let space: SearchSpace = serde_json::from_str(
        r#"{"m": {"start": "3", "stop": "4", "step": "0.05"}, "n": {"start": "5.5", "stop": "7", "step": "0.05"}}"#,
    )
    .unwrap();
    let mut group = c.benchmark_group("slow");
    group.sample_size(10);
    group.bench_function("calibrate/fig4-subgrid", |b| {
        b.iter_batched(|| space.clone(), |s| calibrate(&file, &s).unwrap(), BatchSize::SmallInput)
    });
    group.finish();
}

criterion_group!(benches, numerics, controller, simulation, calibration);
criterion_main!(benches);
