//! End-to-end detection: RGB segmentation, fusion with the depth cloud,
//! conditioning, clustering, plane extraction and pose estimation.

mod config;
mod report;

use std::time::Instant;

use nalgebra::Matrix3;
use rayon::prelude::*;

pub use self::config::PipelineConfig;
pub use self::report::{
    verify_against_ground_truth, Counts, DetectionReport, MatchError, PoseRecord, ReferenceBaseline, StageTimings,
    VerificationTable, DEFAULT_MATCH_RADIUS_MM, TIMING_SCOPE,
};
pub use crate::segmentation::Phase;

use crate::clustering::hdbscan;
use crate::conditioning::{don_filter, mls_resample, statistical_outlier_removal, voxel_grid_downsample, NeighborIndex};
use crate::error::{Error, Result};
use crate::fusion::{map_mask_to_cloud, Homography};
use crate::geometry::{OrganizedCloud, Point3};
use crate::planes::{extract_planes_iterative, group_and_merge_planes, SegmentedPlane};
use crate::pose::{estimate_pose_on_support, Pose6DoF};
use crate::segmentation::{
    auto_canny, extract_roi, find_contours, gaussian_smooth_3x3, generate_masks, refine_contours, scaled_min_area,
    BinaryMask, Contour, GrayImage, MaskRole, Rect,
};

/// Masks of one phase, in ROI coordinates.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub roi: Rect,
    pub contours: Vec<Contour>,
    pub masks: Vec<BinaryMask>,
}

/// ROI → smoothing → auto-Canny → contours → refinement → masks.
pub fn segment(config: &PipelineConfig, image: &GrayImage, phase: Phase) -> Result<Segmentation> {
    let roi = config.roi.unwrap_or(Rect::new(0, 0, image.width(), image.height()));
    let cropped = extract_roi(image, roi)?;
    let smooth = gaussian_smooth_3x3(&cropped)?;
    let edges = auto_canny(&smooth, config.canny_sigma);
    let min_area = config.min_contour_area_px.unwrap_or_else(|| scaled_min_area(image.width(), image.height()));
    let contours = refine_contours(&find_contours(&edges), min_area);
    let masks = generate_masks(&contours, roi.width, roi.height, phase)?;
    Ok(Segmentation { roi, contours, masks })
}

struct MaskCloud {
    role: MaskRole,
    points: Vec<Point3>,
    /// Voxelized points before outlier removal, used to recover plane borders.
    support: Vec<Point3>,
}

/// Per-mask conditioning; every mask is cleaned on its own.
fn condition(config: &PipelineConfig, clouds: Vec<MaskCloud>, timings: &mut StageTimings) -> Vec<MaskCloud> {
    let t = Instant::now();
    let filtered: Vec<MaskCloud> = clouds
        .into_par_iter()
        .map(|c| {
            let support = voxel_grid_downsample(&c.points, config.voxel_leaf).unwrap_or_default();
            let points = if support.len() > config.sor_k {
                statistical_outlier_removal(&support, config.sor_k, config.sor_alpha).unwrap_or_else(|_| support.clone())
            } else {
                support.clone()
            };
            MaskCloud { role: c.role, points, support }
        })
        .collect();
    timings.filtering = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (rs, rl) = config.don_radii();
    let out = filtered
        .into_par_iter()
        .map(|c| {
            let points = mls_resample(&c.points, config.mls_radius, config.mls_order).unwrap_or(c.points);
            let points = don_filter(&points, rs, rl, config.don_threshold).unwrap_or(points);
            MaskCloud { points, ..c }
        })
        .collect();
    timings.resampling_don = t.elapsed().as_secs_f64();
    out
}

/// Plane points plus the candidates lying on the plane within `reach` of
/// one of them.
fn recover_support(plane: &SegmentedPlane, candidates: &[Point3], dist_thresh: f64, reach: f64) -> Vec<Point3> {
    let index = NeighborIndex::new(&plane.points);
    let mut out = plane.points.clone();
    out.extend(candidates.iter().filter(|p| {
        plane.model.signed_distance(p).abs() <= dist_thresh
            && index.knn(p, 1).first().is_some_and(|n| n.distance() <= reach)
    }));
    out
}

/// Fusion onward for masks already in hand. `offset` is the top-left corner
/// of the mask frame within the RGB image.
pub fn localize_masks(
    config: &PipelineConfig,
    masks: &[BinaryMask],
    offset: (usize, usize),
    cloud: &OrganizedCloud,
) -> Result<DetectionReport> {
    let h = config.rgb_to_depth_homography.ok_or(Error::CalibrationMissing)?;
    let start = Instant::now();
    let mut report = DetectionReport::empty();
    localize_into(config, masks, offset, &h, cloud, &mut report)?;
    report.timing_s.total = start.elapsed().as_secs_f64();
    Ok(report)
}

fn localize_into(
    config: &PipelineConfig,
    masks: &[BinaryMask],
    offset: (usize, usize),
    h: &Homography,
    cloud: &OrganizedCloud,
    report: &mut DetectionReport,
) -> Result<()> {
    let t = Instant::now();
    let shift = Matrix3::new(1.0, 0.0, offset.0 as f64, 0.0, 1.0, offset.1 as f64, 0.0, 0.0, 1.0);
    let h = Homography::new(h.matrix() * shift)?;
    let fused: Vec<Option<MaskCloud>> = masks
        .par_iter()
        .map(|m| {
            let m = m.eroded(config.mask_erode_px);
            map_mask_to_cloud(&m, &h, cloud).ok().map(|c| MaskCloud { role: m.role, points: c.points, support: Vec::new() })
        })
        .collect();
    report.counts.masks = masks.len();
    report.counts.skipped_masks = fused.iter().filter(|c| c.is_none()).count();
    let clouds: Vec<MaskCloud> = fused.into_iter().flatten().collect();
    report.timing_s.mask_generation += t.elapsed().as_secs_f64();

    let clouds = condition(config, clouds, &mut report.timing_s);

    let t = Instant::now();
    let min_samples = config.min_samples();
    let per_mask: Vec<(MaskRole, Vec<Vec<Point3>>)> = clouds
        .par_iter()
        .map(|c| {
            let clusters = match hdbscan(&c.points, config.hdbscan_min_cluster_size, min_samples) {
                Ok(labels) => labels
                    .members()
                    .into_iter()
                    .map(|idx| idx.into_iter().map(|i| c.points[i]).collect())
                    .collect(),
                Err(_) => Vec::new(),
            };
            (c.role, clusters)
        })
        .collect();
    let mut clusters: Vec<(MaskRole, usize, Vec<Point3>)> = Vec::new();
    for (mask, (role, cs)) in per_mask.into_iter().enumerate() {
        clusters.extend(cs.into_iter().map(|c| (role, mask, c)));
    }
    report.counts.clusters = clusters.len();
    report.timing_s.clustering = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let params = config.plane_params();
    let planes: Vec<SegmentedPlane> = clusters
        .par_iter()
        .enumerate()
        .map(|(id, (_, _, pts))| extract_planes_iterative(pts, &params, config.ransac_seed, id))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let groups = group_and_merge_planes(&planes, &config.merge_params());
    report.counts.planes = planes.len();
    report.counts.merges = planes.len() - groups.len();
    report.timing_s.plane_segmentation = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut poses: Vec<Pose6DoF> = groups
        .par_iter()
        .filter_map(|g| {
            let role = clusters[g.merged.source_cluster].0;
            let mut masks: Vec<usize> = g.members.iter().map(|&m| clusters[planes[m].source_cluster].1).collect();
            masks.sort_unstable();
            masks.dedup();
            let candidates: Vec<Point3> = masks.iter().flat_map(|&m| clouds[m].support.iter().copied()).collect();
            let support = recover_support(&g.merged, &candidates, config.ransac_dist_thresh, 2.0 * config.voxel_leaf);
            estimate_pose_on_support(&g.merged, &support, role, config.mean_shift_bandwidth).ok()
        })
        .collect();
    poses.sort_by_key(|p| p.priority != MaskRole::Child);
    report.poses = poses.iter().enumerate().map(|(id, p)| PoseRecord::from_pose(id, p)).collect();
    report.timing_s.pose_estimation = t.elapsed().as_secs_f64();
    Ok(())
}

/// Runs one detection phase over an RGB image and its organized cloud.
pub fn run_pipeline(config: &PipelineConfig, image: &GrayImage, cloud: &OrganizedCloud, phase: Phase) -> Result<DetectionReport> {
    config.validate()?;
    let h = config.rgb_to_depth_homography.ok_or(Error::CalibrationMissing)?;
    let start = Instant::now();
    let mut report = DetectionReport::empty();

    let t = Instant::now();
    let seg = segment(config, image, phase)?;
    report.counts.contours = seg.contours.len();
    report.timing_s.mask_generation = t.elapsed().as_secs_f64();

    localize_into(config, &seg.masks, (seg.roi.x, seg.roi.y), &h, cloud, &mut report)?;
    report.timing_s.total = start.elapsed().as_secs_f64();
    Ok(report)
}
