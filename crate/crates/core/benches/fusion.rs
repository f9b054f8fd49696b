//! Sequential against rayon fusion and rendering on a synthetic checkpoint.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use checkpoint_core::fusion::{fuse_frames, FusionConfig};
use checkpoint_core::scenario::{generate, ScenarioConfig};
use checkpoint_core::Exec;

fn fusion(c: &mut Criterion) {
    let truth = generate(&ScenarioConfig::default()).expect("scenario");
    let cfg = FusionConfig::default();
    let camera = truth.config.primary.id;
    let frames = truth
        .render(camera, cfg.n, cfg.eta_det, Exec::Parallel)
        .expect("render");

    let mut group = c.benchmark_group("fuse_frames");
    group.sample_size(10);
    group.throughput(Throughput::Elements(frames.len() as u64));
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| fuse_frames(&frames, &cfg, exec).expect("fusion"))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("render");
    group.sample_size(10);
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| truth.render(camera, cfg.n, cfg.eta_det, exec).expect("render"))
        });
    }
    group.finish();
}

criterion_group!(benches, fusion);
criterion_main!(benches);
