use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{Correspondence, Homography};
use crate::geometry::{EulerZYX, Point3, RigidTransform, Vec3};
use crate::segmentation::Rect;

/// Smallest box edges accepted without an explicit override, in mm.
const MIN_BOX_DIMS_MM: [f64; 3] = [20.0, 50.0, 75.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSpec {
    /// Extent along world x.
    pub length_mm: f64,
    /// Extent along world y.
    pub width_mm: f64,
    pub wall_height_mm: f64,
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec { length_mm: 600.0, width_mm: 400.0, wall_height_mm: 400.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub mount_height_mm: f64,
    pub depth_resolution: [usize; 2],
    pub rgb_resolution: [usize; 2],
    /// Extra field of view around the bin, as a fraction of its length.
    pub fov_margin: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        CameraSpec { mount_height_mm: 1200.0, depth_resolution: [224, 172], rgb_resolution: [2048, 1536], fov_margin: 0.1 }
    }
}

/// Pinhole model; pixel `(u, v)` looks along `((u − cx)/fx, (v − cy)/fy, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    pub fn project(&self, p: &Point3) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    /// Edge lengths along the box's own x, y, z axes; z is the top face normal.
    pub dimensions_mm: [f64; 3],
    pub center_mm: [f64; 3],
    /// Box orientation in the world as Z-Y-X Euler angles.
    #[serde(default)]
    pub rotation_zyx_deg: [f64; 3],
    pub face_intensity: u8,
    #[serde(default)]
    pub allow_undersized: bool,
}

impl BoxSpec {
    /// Box resting flat on `base_mm` (height of its bottom face), turned by `yaw_deg`.
    pub fn resting(dimensions_mm: [f64; 3], x_mm: f64, y_mm: f64, base_mm: f64, yaw_deg: f64, face_intensity: u8) -> Self {
        BoxSpec {
            dimensions_mm,
            center_mm: [x_mm, y_mm, base_mm + dimensions_mm[2] / 2.0],
            rotation_zyx_deg: [yaw_deg, 0.0, 0.0],
            face_intensity,
            allow_undersized: false,
        }
    }

    /// Box frame to world, in meters.
    pub fn pose(&self) -> RigidTransform {
        let [z, y, x] = self.rotation_zyx_deg;
        let r = EulerZYX::new(z, y, x).to_rotation();
        RigidTransform::new(r, Vec3::from(self.center_mm) / 1000.0).expect("Euler angles give a rotation")
    }

    pub fn half_extents(&self) -> Vec3 {
        Vec3::from(self.dimensions_mm) / 2000.0
    }

    /// World coordinates of the eight corners, in meters.
    pub fn corners(&self) -> Vec<Point3> {
        let h = self.half_extents();
        let pose = self.pose();
        let mut out = Vec::with_capacity(8);
        for sz in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sx in [-1.0, 1.0] {
                    out.push(pose.apply(&Point3::new(sx * h.x, sy * h.y, sz * h.z)));
                }
            }
        }
        out
    }

    /// Top face corners in world coordinates, counter-clockwise in the box frame.
    pub fn top_corners(&self) -> [Point3; 4] {
        let h = self.half_extents();
        let pose = self.pose();
        [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)].map(|(sx, sy)| pose.apply(&Point3::new(sx * h.x, sy * h.y, h.z)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    #[serde(default)]
    pub bin: BinSpec,
    #[serde(default)]
    pub camera: CameraSpec,
    #[serde(default = "default_floor_intensity")]
    pub floor_intensity: u8,
    /// Depth noise standard deviation along each ray, in meters.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub boxes: Vec<BoxSpec>,
}

fn default_floor_intensity() -> u8 {
    60
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            bin: BinSpec::default(),
            camera: CameraSpec::default(),
            floor_intensity: default_floor_intensity(),
            noise_sigma: 0.0,
            seed: 0,
            boxes: Vec::new(),
        }
    }
}

impl SceneSpec {
    pub fn with_boxes(boxes: Vec<BoxSpec>) -> Self {
        SceneSpec { boxes, ..SceneSpec::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scene: SceneSpec = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn mount_height(&self) -> f64 {
        self.camera.mount_height_mm / 1000.0
    }

    /// Depth focal length framing the bin length plus the margin.
    fn depth_focal(&self) -> f64 {
        let half_view = self.bin.length_mm * (1.0 + self.camera.fov_margin) / 2.0;
        (self.camera.depth_resolution[0] as f64 / 2.0) * self.camera.mount_height_mm / half_view
    }

    pub fn depth_intrinsics(&self) -> Intrinsics {
        let [w, h] = self.camera.depth_resolution;
        let f = self.depth_focal();
        Intrinsics { width: w, height: h, fx: f, fy: f, cx: w as f64 / 2.0, cy: h as f64 / 2.0 }
    }

    /// RGB camera sharing the depth camera's centre and horizontal field of view.
    pub fn rgb_intrinsics(&self) -> Intrinsics {
        let [w, h] = self.camera.rgb_resolution;
        let f = self.depth_focal() * w as f64 / self.camera.depth_resolution[0] as f64;
        Intrinsics { width: w, height: h, fx: f, fy: f, cx: w as f64 / 2.0, cy: h as f64 / 2.0 }
    }

    pub fn camera_center(&self) -> Point3 {
        Point3::new(0.0, 0.0, self.mount_height())
    }

    pub fn world_to_sensor(&self, p: &Point3) -> Point3 {
        Point3::new(p.x, -p.y, self.mount_height() - p.z)
    }

    pub fn sensor_to_world_vector(&self, v: &Vec3) -> Vec3 {
        Vec3::new(v.x, -v.y, -v.z)
    }

    pub fn world_to_sensor_vector(&self, v: &Vec3) -> Vec3 {
        Vec3::new(v.x, -v.y, -v.z)
    }

    /// Exact RGB to depth pixel mapping; both cameras share one centre.
    pub fn homography(&self) -> Homography {
        let h = self.depth_intrinsics().matrix() * self.rgb_intrinsics().matrix().try_inverse().expect("intrinsics are invertible");
        Homography::new(h).expect("intrinsic ratio is invertible")
    }

    /// Pixel pairs seen by both cameras, from points spread over the bin.
    pub fn correspondences(&self, n_side: usize) -> Vec<Correspondence> {
        let (rgb, depth) = (self.rgb_intrinsics(), self.depth_intrinsics());
        let mut out = Vec::new();
        for j in 0..n_side {
            for i in 0..n_side {
                let fx = i as f64 / (n_side - 1).max(1) as f64 - 0.5;
                let fy = j as f64 / (n_side - 1).max(1) as f64 - 0.5;
                let z = 0.1 * ((i + 2 * j) % 3) as f64;
                let w = Point3::new(fx * self.bin.length_mm / 1000.0, fy * self.bin.width_mm / 1000.0, z);
                let s = self.world_to_sensor(&w);
                out.push(Correspondence::new(rgb.project(&s), depth.project(&s)));
            }
        }
        out
    }

    /// Bounding rectangle of the bin opening in the RGB image, clamped to the frame.
    pub fn rgb_bin_roi(&self) -> Rect {
        let k = self.rgb_intrinsics();
        let (hx, hy) = (self.bin.length_mm / 2000.0, self.bin.width_mm / 2000.0);
        let rim = self.bin.wall_height_mm / 1000.0;
        let corners = [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)].map(|(x, y)| k.project(&self.world_to_sensor(&Point3::new(x, y, rim))));
        let x0 = corners.iter().map(|c| c.0).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let y0 = corners.iter().map(|c| c.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let x1 = (corners.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max).ceil() as usize).min(k.width);
        let y1 = (corners.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max).ceil() as usize).min(k.height);
        Rect::new(x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.bin.length_mm > 0.0 && self.bin.width_mm > 0.0 && self.bin.wall_height_mm > 0.0) {
            return bad("bin dimensions must be positive".into());
        }
        if !(self.camera.mount_height_mm > self.bin.wall_height_mm) {
            return bad("camera must be mounted above the bin walls".into());
        }
        if self.camera.depth_resolution.contains(&0) || self.camera.rgb_resolution.contains(&0) {
            return bad("camera resolutions must be nonzero".into());
        }
        if !(self.camera.fov_margin >= 0.0) {
            return bad("fov_margin must be non-negative".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        let (hx, hy) = (self.bin.length_mm / 2000.0, self.bin.width_mm / 2000.0);
        let top = self.bin.wall_height_mm / 1000.0;
        for (i, b) in self.boxes.iter().enumerate() {
            if b.dimensions_mm.iter().any(|d| !(*d > 0.0)) {
                return bad(format!("box {i}: dimensions must be positive"));
            }
            let mut dims = b.dimensions_mm;
            dims.sort_by(f64::total_cmp);
            if !b.allow_undersized && dims.iter().zip(MIN_BOX_DIMS_MM).any(|(d, m)| *d < m) {
                return bad(format!("box {i}: dimensions {:?} below the 20x50x75 mm minimum", b.dimensions_mm));
            }
            let eps = 1e-9;
            if b.corners().iter().any(|c| c.x.abs() > hx + eps || c.y.abs() > hy + eps || c.z < -eps || c.z > top + eps) {
                return bad(format!("box {i} leaves the bin volume"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::estimate_homography;

    #[test]
    fn default_camera_frames_the_bin() {
        let s = SceneSpec::default();
        let k = s.depth_intrinsics();
        assert!((k.fx - 112.0 * 1200.0 / 330.0).abs() < 1e-9);
        let (u, _) = k.project(&s.world_to_sensor(&Point3::new(0.3, 0.0, 0.0)));
        assert!(u < 224.0 && u > 200.0);
    }

    #[test]
    fn homography_maps_projections() {
        let s = SceneSpec::default();
        let h = s.homography();
        for c in s.correspondences(5) {
            let (u, v) = h.apply(c.rgb.0, c.rgb.1);
            assert!((u - c.depth.0).abs() < 1e-9 && (v - c.depth.1).abs() < 1e-9);
        }
        let est = estimate_homography(&s.correspondences(6)).unwrap();
        assert!((est.matrix() - h.matrix()).abs().max() < 1e-6);
    }

    #[test]
    fn validation() {
        let ok = SceneSpec::with_boxes(vec![BoxSpec::resting([200.0, 150.0, 80.0], 0.0, 0.0, 0.0, 10.0, 200)]);
        assert!(ok.validate().is_ok());
        let small = SceneSpec::with_boxes(vec![BoxSpec::resting([40.0, 40.0, 40.0], 0.0, 0.0, 0.0, 0.0, 200)]);
        assert!(small.validate().is_err());
        let mut allowed = small.clone();
        allowed.boxes[0].allow_undersized = true;
        assert!(allowed.validate().is_ok());
        let outside = SceneSpec::with_boxes(vec![BoxSpec::resting([200.0, 150.0, 80.0], 250.0, 0.0, 0.0, 0.0, 200)]);
        assert!(outside.validate().is_err());
        let sunk = SceneSpec::with_boxes(vec![BoxSpec::resting([200.0, 150.0, 80.0], 0.0, 0.0, -10.0, 0.0, 200)]);
        assert!(sunk.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = SceneSpec::with_boxes(vec![BoxSpec::resting([200.0, 150.0, 80.0], 10.0, -20.0, 0.0, 17.0, 190)]);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(SceneSpec::from_json(&text).unwrap(), s);
        assert!(SceneSpec::from_json(r#"{"boxes":[],"colour":3}"#).is_err());
        assert_eq!(SceneSpec::from_json("{}").unwrap(), SceneSpec::default());
    }
}
