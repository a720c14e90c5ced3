use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::Homography;
use crate::planes::{MergeParams, PlaneParams};
use crate::segmentation::Rect;

/// Every tunable of the detection pipeline. Lengths are in meters unless
/// the name says otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Region of the RGB image to segment; the whole image when absent.
    pub roi: Option<Rect>,
    pub canny_sigma: f64,
    /// Minimum contour area in RGB pixels; scaled to the image size when absent.
    pub min_contour_area_px: Option<f64>,
    /// Mask erosion before projection, keeps box borders out of the cloud.
    pub mask_erode_px: usize,
    pub voxel_leaf: f64,
    pub sor_k: usize,
    pub sor_alpha: f64,
    pub mls_radius: f64,
    pub mls_order: usize,
    /// Defaults to twice the voxel leaf.
    pub don_small_radius: Option<f64>,
    /// Defaults to five times the voxel leaf.
    pub don_large_radius: Option<f64>,
    pub don_threshold: f64,
    pub hdbscan_min_cluster_size: usize,
    /// Defaults to the minimum cluster size.
    pub hdbscan_min_samples: Option<usize>,
    pub ransac_dist_thresh: f64,
    pub ransac_max_iter: usize,
    pub ransac_seed: u64,
    pub min_object_size: usize,
    pub max_planes_per_cluster: usize,
    pub merge_angle_deg: f64,
    pub merge_centroid_dist: f64,
    pub merge_perp_dist: f64,
    pub mean_shift_bandwidth: f64,
    pub rgb_to_depth_homography: Option<Homography>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            roi: None,
            canny_sigma: crate::segmentation::DEFAULT_CANNY_SIGMA,
            min_contour_area_px: None,
            mask_erode_px: 5,
            voxel_leaf: 0.005,
            sor_k: 8,
            sor_alpha: 1.0,
            mls_radius: 0.015,
            mls_order: 2,
            don_small_radius: None,
            don_large_radius: None,
            don_threshold: 0.25,
            hdbscan_min_cluster_size: 30,
            hdbscan_min_samples: None,
            ransac_dist_thresh: 0.005,
            ransac_max_iter: 200,
            ransac_seed: 0,
            min_object_size: 30,
            max_planes_per_cluster: 10,
            merge_angle_deg: 5.0,
            merge_centroid_dist: 0.05,
            merge_perp_dist: 0.005,
            mean_shift_bandwidth: crate::pose::DEFAULT_BANDWIDTH,
            rgb_to_depth_homography: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn with_homography(h: Homography) -> Self {
        PipelineConfig { rgb_to_depth_homography: Some(h), ..PipelineConfig::default() }
    }

    pub fn don_radii(&self) -> (f64, f64) {
        (
            self.don_small_radius.unwrap_or(2.0 * self.voxel_leaf),
            self.don_large_radius.unwrap_or(5.0 * self.voxel_leaf),
        )
    }

    pub fn min_samples(&self) -> usize {
        self.hdbscan_min_samples.unwrap_or(self.hdbscan_min_cluster_size)
    }

    pub fn plane_params(&self) -> PlaneParams {
        PlaneParams {
            dist_thresh: self.ransac_dist_thresh,
            max_iter: self.ransac_max_iter,
            min_cluster_size: self.hdbscan_min_cluster_size,
            min_object_size: self.min_object_size,
            max_planes: self.max_planes_per_cluster,
        }
    }

    pub fn merge_params(&self) -> MergeParams {
        MergeParams {
            angle_tol_deg: self.merge_angle_deg,
            centroid_thresh: self.merge_centroid_dist,
            perp_thresh: self.merge_perp_dist,
            dist_thresh: self.ransac_dist_thresh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        }
        if let Some(roi) = self.roi {
            if roi.width < 3 || roi.height < 3 {
                return Err(Error::Config("roi must be at least 3x3".into()));
            }
        }
        if !(self.canny_sigma >= 0.0 && self.canny_sigma < 1.0) {
            return Err(Error::Config(format!("canny_sigma must lie in [0, 1), got {}", self.canny_sigma)));
        }
        if let Some(a) = self.min_contour_area_px {
            if !(a >= 0.0) {
                return Err(Error::Config(format!("min_contour_area_px must be non-negative, got {a}")));
            }
        }
        positive("voxel_leaf", self.voxel_leaf)?;
        if self.sor_k == 0 {
            return Err(Error::Config("sor_k must be at least 1".into()));
        }
        if !(self.sor_alpha >= 0.0) {
            return Err(Error::Config(format!("sor_alpha must be non-negative, got {}", self.sor_alpha)));
        }
        positive("mls_radius", self.mls_radius)?;
        if !(1..=2).contains(&self.mls_order) {
            return Err(Error::Config(format!("mls_order must be 1 or 2, got {}", self.mls_order)));
        }
        let (rs, rl) = self.don_radii();
        positive("don_small_radius", rs)?;
        if rs >= rl {
            return Err(Error::Config(format!("don_small_radius {rs} must be below don_large_radius {rl}")));
        }
        positive("don_threshold", self.don_threshold)?;
        if self.hdbscan_min_cluster_size < 2 {
            return Err(Error::Config("hdbscan_min_cluster_size must be at least 2".into()));
        }
        if self.min_samples() == 0 {
            return Err(Error::Config("hdbscan_min_samples must be at least 1".into()));
        }
        positive("ransac_dist_thresh", self.ransac_dist_thresh)?;
        if self.ransac_max_iter == 0 || self.max_planes_per_cluster == 0 {
            return Err(Error::Config("ransac_max_iter and max_planes_per_cluster must be at least 1".into()));
        }
        if self.min_object_size < 3 {
            return Err(Error::Config("min_object_size must be at least 3".into()));
        }
        if !(self.merge_angle_deg >= 0.0 && self.merge_angle_deg <= 90.0) {
            return Err(Error::Config(format!("merge_angle_deg must lie in [0, 90], got {}", self.merge_angle_deg)));
        }
        positive("merge_centroid_dist", self.merge_centroid_dist)?;
        positive("merge_perp_dist", self.merge_perp_dist)?;
        positive("mean_shift_bandwidth", self.mean_shift_bandwidth)?;
        Ok(())
    }
}
