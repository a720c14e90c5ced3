//! Box detection and grasp pose estimation for bin picking with a paired
//! RGB camera and time-of-flight depth sensor.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`geometry`]: points, planes, rigid transforms and Euler angles shared by every stage.
//! * [`segmentation`]: RGB box segmentation into child/parent binary masks.
//! * [`fusion`]: RGB to depth calibration and projection of masks onto the organized cloud.
//! * [`conditioning`]: voxel grid, statistical outlier removal, MLS resampling and
//!   difference-of-normals edge removal.
//! * [`clustering`]: HDBSCAN over the conditioned points.
//! * [`planes`]: iterative RANSAC plane extraction and merging of duplicate planes.
//! * [`pose`]: mean-shift centroid, grasp frame and Z-Y-X Euler angles.
//! * [`synth`]: synthetic bins with exact ground truth.
//! * [`pipeline`]: configuration, orchestration, reports and verification.
//!
//! Sensor frame convention: x to the right, y down, z forward out of the
//! sensor. Lengths are meters internally; reports use millimeters and degrees.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod clustering;
pub mod conditioning;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod planes;
pub mod pose;
pub mod segmentation;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{
    apply_transform, normalize_plane, plane_signed_distance, EulerZYX, OrganizedCloud,
    PlaneModel, Point3, RigidTransform, Vec3,
};
pub use pipeline::{run_pipeline, DetectionReport, Phase, PipelineConfig};
pub use pose::Pose6DoF;
pub use segmentation::{BinaryMask, GrayImage, MaskRole};
