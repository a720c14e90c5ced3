//! Shared scene fixtures for the stage benchmarks.

use binpick_core::synth::{render_depth, render_image, BoxSpec, SceneSpec};
use binpick_core::{GrayImage, OrganizedCloud, PipelineConfig};

/// Four boxes spread over the bin, with depth noise.
pub fn four_box_scene() -> SceneSpec {
    SceneSpec {
        noise_sigma: 0.002,
        seed: 7,
        ..SceneSpec::with_boxes(vec![
            BoxSpec::resting([200.0, 150.0, 80.0], -150.0, -90.0, 0.0, 12.0, 200),
            BoxSpec::resting([180.0, 120.0, 100.0], 140.0, -80.0, 0.0, -20.0, 170),
            BoxSpec::resting([160.0, 110.0, 90.0], -140.0, 100.0, 0.0, 33.0, 230),
            BoxSpec::resting([150.0, 100.0, 120.0], 150.0, 100.0, 0.0, 5.0, 150),
        ])
    }
}

/// Rendered inputs plus a matching configuration.
pub fn rendered(scene: &SceneSpec) -> (PipelineConfig, GrayImage, OrganizedCloud) {
    let config = PipelineConfig { roi: Some(scene.rgb_bin_roi()), ..PipelineConfig::with_homography(scene.homography()) };
    let cloud = binpick_core::synth::add_depth_noise(&render_depth(scene), scene.noise_sigma, scene.seed);
    (config, render_image(scene), cloud)
}
