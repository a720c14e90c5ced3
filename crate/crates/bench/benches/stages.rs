use std::hint::black_box;

use binpick_bench::{four_box_scene, rendered};
use binpick_core::clustering::hdbscan;
use binpick_core::conditioning::{don_filter, mls_resample, statistical_outlier_removal, voxel_grid_downsample};
use binpick_core::pipeline::segment;
use binpick_core::planes::extract_planes_iterative;
use binpick_core::{run_pipeline, Phase};
use criterion::{criterion_group, criterion_main, Criterion};

fn stages(c: &mut Criterion) {
    let scene = four_box_scene();
    let (config, image, cloud) = rendered(&scene);
    let points: Vec<_> = cloud.valid_points().collect();
    let voxels = voxel_grid_downsample(&points, config.voxel_leaf).unwrap();

    c.bench_function("segment", |b| b.iter(|| segment(&config, black_box(&image), Phase::ParentAfter).unwrap()));
    c.bench_function("voxel_grid", |b| b.iter(|| voxel_grid_downsample(black_box(&points), 0.005).unwrap()));
    c.bench_function("sor", |b| b.iter(|| statistical_outlier_removal(black_box(&voxels), 8, 1.0).unwrap()));
    c.bench_function("mls", |b| b.iter(|| mls_resample(black_box(&voxels), 0.015, 2).unwrap()));
    c.bench_function("don", |b| b.iter(|| don_filter(black_box(&voxels), 0.01, 0.025, 0.25).unwrap()));

    let top: Vec<_> = voxels.iter().copied().filter(|p| p.z < 1.15).take(1500).collect();
    c.bench_function("hdbscan", |b| b.iter(|| hdbscan(black_box(&top), 30, 30).unwrap()));
    let params = config.plane_params();
    c.bench_function("planes", |b| b.iter(|| extract_planes_iterative(black_box(&top), &params, 0, 0)));

    c.bench_function("pipeline", |b| {
        b.iter(|| run_pipeline(&config, black_box(&image), black_box(&cloud), Phase::ParentAfter).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = stages
}
criterion_main!(benches);
