use serde::{Deserialize, Serialize};

use crate::geometry::wrap_degrees;
use crate::pose::Pose6DoF;
use crate::segmentation::MaskRole;
use crate::synth::GroundTruth;

pub const TIMING_SCOPE: &str = "computation only";
pub const DEFAULT_MATCH_RADIUS_MM: f64 = 30.0;

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageTimings {
    pub mask_generation: f64,
    pub filtering: f64,
    pub resampling_don: f64,
    pub clustering: f64,
    pub plane_segmentation: f64,
    pub pose_estimation: f64,
    pub total: f64,
}

impl StageTimings {
    pub fn stage_sum(&self) -> f64 {
        self.mask_generation
            + self.filtering
            + self.resampling_don
            + self.clustering
            + self.plane_segmentation
            + self.pose_estimation
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub contours: usize,
    pub masks: usize,
    /// Masks that landed on no valid depth point.
    pub skipped_masks: usize,
    pub clusters: usize,
    pub planes: usize,
    pub merges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub id: usize,
    pub priority: MaskRole,
    pub centroid_mm: [f64; 3],
    pub euler_zyx_deg: [f64; 3],
    pub plane: [f64; 4],
    pub inliers: usize,
}

impl PoseRecord {
    pub fn from_pose(id: usize, p: &Pose6DoF) -> Self {
        PoseRecord {
            id,
            priority: p.priority,
            centroid_mm: p.centroid.coords.into(),
            euler_zyx_deg: p.euler.as_array(),
            plane: p.plane.coefficients(),
            inliers: p.inlier_count,
        }
    }
}

/// Poses (children first), stage timings and bookkeeping counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub poses: Vec<PoseRecord>,
    pub timing_s: StageTimings,
    pub timing_scope: String,
    pub counts: Counts,
}

impl DetectionReport {
    pub fn empty() -> Self {
        DetectionReport {
            poses: Vec::new(),
            timing_s: StageTimings::default(),
            timing_scope: TIMING_SCOPE.to_string(),
            counts: Counts::default(),
        }
    }

    pub fn poses_json(&self) -> String {
        serde_json::to_string(&self.poses).expect("poses serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchError {
    pub truth_id: usize,
    pub pose_id: usize,
    /// Absolute error per axis in mm.
    pub translation_mm: [f64; 3],
    /// Absolute error per Euler angle (Z, Y, X) in degrees.
    pub rotation_deg: [f64; 3],
}

/// Averages measured on the physical rig, shown for comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBaseline {
    pub translation_mm: [f64; 3],
    pub rotation_deg: [f64; 2],
}

impl Default for ReferenceBaseline {
    fn default() -> Self {
        ReferenceBaseline { translation_mm: [3.03, 3.27, 3.3], rotation_deg: [2.95, 3.26] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationTable {
    pub matches: Vec<MatchError>,
    pub mean_translation_mm: [f64; 3],
    pub mean_rotation_deg: [f64; 3],
    pub misses: usize,
    pub unmatched_poses: usize,
    pub reference: ReferenceBaseline,
}

/// Greedy nearest-centroid matching within `match_radius_mm`, closest
/// pairs first.
pub fn verify_against_ground_truth(poses: &[PoseRecord], truth: &[GroundTruth], match_radius_mm: f64) -> VerificationTable {
    let dist = |p: &PoseRecord, t: &GroundTruth| {
        (0..3).map(|d| (p.centroid_mm[d] - t.centroid_mm[d]).powi(2)).sum::<f64>().sqrt()
    };
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, t) in truth.iter().enumerate() {
        for (pi, p) in poses.iter().enumerate() {
            let d = dist(p, t);
            if d <= match_radius_mm {
                pairs.push((d, ti, pi));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut truth_used = vec![false; truth.len()];
    let mut pose_used = vec![false; poses.len()];
    let mut matches = Vec::new();
    for (_, ti, pi) in pairs {
        if truth_used[ti] || pose_used[pi] {
            continue;
        }
        truth_used[ti] = true;
        pose_used[pi] = true;
        let (t, p) = (&truth[ti], &poses[pi]);
        matches.push(MatchError {
            truth_id: t.id,
            pose_id: p.id,
            translation_mm: [0, 1, 2].map(|d| (p.centroid_mm[d] - t.centroid_mm[d]).abs()),
            rotation_deg: [0, 1, 2].map(|d| wrap_degrees(p.euler_zyx_deg[d] - t.euler_zyx_deg[d]).abs()),
        });
    }
    matches.sort_by_key(|m| m.truth_id);
    let n = matches.len().max(1) as f64;
    let mean = |f: &dyn Fn(&MatchError) -> [f64; 3]| {
        let mut acc = [0.0; 3];
        for m in &matches {
            for (a, v) in acc.iter_mut().zip(f(m)) {
                *a += v;
            }
        }
        acc.map(|a| a / n)
    };
    VerificationTable {
        mean_translation_mm: mean(&|m| m.translation_mm),
        mean_rotation_deg: mean(&|m| m.rotation_deg),
        misses: truth_used.iter().filter(|u| !**u).count(),
        unmatched_poses: pose_used.iter().filter(|u| !**u).count(),
        matches,
        reference: ReferenceBaseline::default(),
    }
}
