#![allow(dead_code)]

use binpick_core::pipeline::{run_pipeline, PoseRecord};
use binpick_core::synth::{add_depth_noise, render_depth, render_image, BoxSpec, SceneSpec};
use binpick_core::{GrayImage, OrganizedCloud, Phase, PipelineConfig};

/// Tilts (about world x, then world y) covering flat, single-axis and
/// combined orientations.
pub const TILTS: [(f64, f64); 9] =
    [(0.0, 0.0), (45.0, 0.0), (-45.0, 0.0), (0.0, 45.0), (0.0, -45.0), (45.0, 45.0), (45.0, -45.0), (-45.0, 45.0), (-45.0, -45.0)];

pub fn tilted_scene(tilt_x: f64, tilt_y: f64) -> SceneSpec {
    let b = BoxSpec {
        dimensions_mm: [200.0, 150.0, 80.0],
        center_mm: [30.0, -20.0, 200.0],
        rotation_zyx_deg: [17.0, tilt_y, tilt_x],
        face_intensity: 200,
        allow_undersized: false,
    };
    SceneSpec::with_boxes(vec![b])
}

pub fn config_for(scene: &SceneSpec) -> PipelineConfig {
    PipelineConfig { roi: Some(scene.rgb_bin_roi()), ..PipelineConfig::with_homography(scene.homography()) }
}

pub struct Rendered {
    pub config: PipelineConfig,
    pub image: GrayImage,
    pub clean: OrganizedCloud,
}

impl Rendered {
    pub fn new(scene: &SceneSpec) -> Self {
        Rendered { config: config_for(scene), image: render_image(scene), clean: render_depth(scene) }
    }

    pub fn noisy(&self, sigma_m: f64, seed: u64) -> OrganizedCloud {
        add_depth_noise(&self.clean, sigma_m, seed)
    }

    /// Child-first then parent-after on the same frame; ids renumbered.
    pub fn both_phases(&self, cloud: &OrganizedCloud) -> (Vec<PoseRecord>, Vec<PoseRecord>) {
        let child = run_pipeline(&self.config, &self.image, cloud, Phase::ChildFirst).expect("child phase runs");
        let parent = run_pipeline(&self.config, &self.image, cloud, Phase::ParentAfter).expect("parent phase runs");
        (child.poses, parent.poses)
    }
}

pub fn combined(child: Vec<PoseRecord>, parent: Vec<PoseRecord>) -> Vec<PoseRecord> {
    child.into_iter().chain(parent).enumerate().map(|(id, p)| PoseRecord { id, ..p }).collect()
}

/// Six boxes: two stacked pairs near the middle and two loose boxes.
pub fn cluttered_scene() -> SceneSpec {
    SceneSpec::with_boxes(vec![
        BoxSpec::resting([220.0, 160.0, 100.0], -130.0, -80.0, 0.0, 8.0, 140),
        BoxSpec::resting([110.0, 80.0, 60.0], -100.0, -60.0, 100.0, 20.0, 230),
        BoxSpec::resting([220.0, 160.0, 90.0], 130.0, 80.0, 0.0, -12.0, 160),
        BoxSpec::resting([100.0, 80.0, 60.0], 100.0, 60.0, 90.0, -25.0, 210),
        BoxSpec::resting([150.0, 100.0, 120.0], 190.0, -110.0, 0.0, 5.0, 190),
        BoxSpec::resting([140.0, 100.0, 80.0], -200.0, 120.0, 0.0, -5.0, 120),
    ])
}

/// Four boxes spread over the bin.
pub fn four_box_scene() -> SceneSpec {
    SceneSpec::with_boxes(vec![
        BoxSpec::resting([200.0, 150.0, 80.0], -150.0, -90.0, 0.0, 12.0, 200),
        BoxSpec::resting([180.0, 120.0, 100.0], 140.0, -80.0, 0.0, -20.0, 170),
        BoxSpec::resting([160.0, 110.0, 90.0], -140.0, 100.0, 0.0, 33.0, 230),
        BoxSpec::resting([150.0, 100.0, 120.0], 150.0, 100.0, 0.0, 5.0, 150),
    ])
}
