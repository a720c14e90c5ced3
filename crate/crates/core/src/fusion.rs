//! RGB to depth calibration and mask projection onto the organized cloud.
//!
//! The two sensors sit side by side looking at the bin, so a planar
//! perspective transform maps RGB pixels onto depth pixels. Parallax
//! between the two optical centres is ignored.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{OrganizedCloud, Point3};
use crate::segmentation::{BinaryMask, MaskRole};

/// JSON key under which the homography is persisted.
pub const HOMOGRAPHY_KEY: &str = "rgb_to_depth_homography";

/// Maps homogeneous RGB pixel coordinates to depth pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    h: Matrix3<f64>,
}

impl Homography {
    /// Normalises `h[2][2]` to 1 and checks invertibility.
    pub fn new(h: Matrix3<f64>) -> Result<Self> {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateConfiguration("homography has non-finite entries".into()));
        }
        let scale = h[(2, 2)];
        if scale.abs() < 1e-15 {
            return Err(Error::DegenerateConfiguration("homography h[2][2] is zero".into()));
        }
        let h = h / scale;
        if h.determinant().abs() <= 1e-12 {
            return Err(Error::DegenerateConfiguration("homography is singular".into()));
        }
        Ok(Homography { h })
    }

    pub fn identity() -> Self {
        Homography { h: Matrix3::identity() }
    }

    pub fn from_row_major(v: [f64; 9]) -> Result<Self> {
        Homography::new(Matrix3::from_row_slice(&v))
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = self.h[(r, c)];
            }
        }
        out
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let p = self.h * Vector3::new(x, y, 1.0);
        (p.x / p.z, p.y / p.z)
    }
}

impl Serialize for Homography {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_row_major().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Homography {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = <[f64; 9]>::deserialize(d)?;
        Homography::from_row_major(v).map_err(serde::de::Error::custom)
    }
}

/// Calibration file contents: `{"rgb_to_depth_homography": [9 numbers]}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub rgb_to_depth_homography: Homography,
}

/// One RGB ↔ depth pixel pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub rgb: (f64, f64),
    pub depth: (f64, f64),
}

impl Correspondence {
    pub fn new(rgb: (f64, f64), depth: (f64, f64)) -> Self {
        Correspondence { rgb, depth }
    }
}

/// Normalised direct linear transform over at least four correspondences.
pub fn estimate_homography(pairs: &[Correspondence]) -> Result<Homography> {
    if pairs.len() < 4 {
        return Err(Error::DegenerateConfiguration(format!("need at least 4 correspondences, got {}", pairs.len())));
    }
    let src: Vec<(f64, f64)> = pairs.iter().map(|p| p.rgb).collect();
    let dst: Vec<(f64, f64)> = pairs.iter().map(|p| p.depth).collect();
    check_configuration(&src, "source")?;
    check_configuration(&dst, "target")?;

    let t_src = normalizer(&src);
    let t_dst = normalizer(&dst);
    let n = pairs.len();
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src.iter().zip(&dst).enumerate() {
        let s = t_src * Vector3::new(s.0, s.1, 1.0);
        let d = t_dst * Vector3::new(d.0, d.1, 1.0);
        let (x, y) = (s.x / s.z, s.y / s.z);
        let (u, v) = (d.x / d.z, d.y / d.z);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::DegenerateConfiguration("SVD failed".into()))?;
    let (mut order, sv) = ((0..9).collect::<Vec<_>>(), &svd.singular_values);
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    if sv[order[1]] <= 1e-10 * sv[order[8]] {
        return Err(Error::DegenerateConfiguration("correspondences do not determine a unique homography".into()));
    }
    let h = v_t.row(order[0]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst.try_inverse().ok_or_else(|| Error::DegenerateConfiguration("bad normalisation".into()))?;
    Homography::new(t_dst_inv * hn * t_src)
}

/// Rejects duplicate points and, for exactly four points, any collinear
/// triple; larger sets must not be collinear overall.
fn check_configuration(pts: &[(f64, f64)], which: &str) -> Result<()> {
    let scale = pts.iter().fold(0.0f64, |m, p| m.max(p.0.abs()).max(p.1.abs())).max(1.0);
    let tol = 1e-9 * scale * scale;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if (pts[i].0 - pts[j].0).abs() <= 1e-12 * scale && (pts[i].1 - pts[j].1).abs() <= 1e-12 * scale {
                return Err(Error::DegenerateConfiguration(format!("duplicate {which} points {i} and {j}")));
            }
        }
    }
    let cross = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| ((b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)).abs();
    if pts.len() == 4 {
        for skip in 0..4 {
            let t: Vec<_> = (0..4).filter(|&k| k != skip).map(|k| pts[k]).collect();
            if cross(t[0], t[1], t[2]) <= tol {
                return Err(Error::DegenerateConfiguration(format!("collinear {which} points")));
            }
        }
    } else {
        let a = pts[0];
        let far = pts.iter().copied().max_by(|p, q| {
            let dp = (p.0 - a.0).hypot(p.1 - a.1);
            let dq = (q.0 - a.0).hypot(q.1 - a.1);
            dp.total_cmp(&dq)
        });
        let b = far.unwrap_or(a);
        if pts.iter().all(|&c| cross(a, b, c) <= tol) {
            return Err(Error::DegenerateConfiguration(format!("all {which} points collinear")));
        }
    }
    Ok(())
}

/// Similarity moving the centroid to the origin with mean distance √2.
fn normalizer(pts: &[(f64, f64)]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let (cx, cy) = pts.iter().fold((0.0, 0.0), |(x, y), p| (x + p.0, y + p.1));
    let (cx, cy) = (cx / n, cy / n);
    let mean = pts.iter().map(|p| (p.0 - cx).hypot(p.1 - cy)).sum::<f64>() / n;
    let s = if mean > 0.0 { std::f64::consts::SQRT_2 / mean } else { 1.0 };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

/// Depth points selected by one mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedCluster {
    pub points: Vec<Point3>,
    pub source_mask_role: MaskRole,
}

/// Maps every set mask pixel through `h`, rounds to the nearest depth cell
/// and collects the valid points there. Several RGB pixels landing on one
/// cell contribute a single point; output follows cell order.
pub fn map_mask_to_cloud(mask: &BinaryMask, h: &Homography, cloud: &OrganizedCloud) -> Result<MaskedCluster> {
    let (w, hgt) = (cloud.width(), cloud.height());
    let mut taken = vec![false; w * hgt];
    if let Some(bb) = mask.bits.bounding_box() {
        for y in bb.y..bb.y + bb.height {
            for x in bb.x..bb.x + bb.width {
                if !mask.bits.get(x, y) {
                    continue;
                }
                let (u, v) = h.apply(x as f64, y as f64);
                let (u, v) = (u.round(), v.round());
                if u < 0.0 || v < 0.0 || u >= w as f64 || v >= hgt as f64 {
                    continue;
                }
                let i = v as usize * w + u as usize;
                if cloud.valid()[i] {
                    taken[i] = true;
                }
            }
        }
    }
    let points: Vec<Point3> = taken
        .iter()
        .enumerate()
        .filter(|(_, &t)| t)
        .map(|(i, _)| cloud.points()[i])
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyCluster);
    }
    Ok(MaskedCluster { points, source_mask_role: mask.role })
}
