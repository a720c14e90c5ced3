//! Synthetic bins of boxes with exact ground truth.
//!
//! World frame: origin at the centre of the bin floor, z up. The camera
//! looks straight down from the mount height; its frame has x along world
//! x, y along world −y and z along world −z.

mod render;
mod scene;
mod truth;

pub use render::{add_depth_noise, cast_ray, render_depth, render_hits, render_image, Hit};
pub use scene::{BinSpec, BoxSpec, CameraSpec, Intrinsics, SceneSpec};
pub use truth::{ground_truth, GroundTruth};
