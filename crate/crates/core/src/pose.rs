//! Grasp pose of a plane: mean-shift centroid, plane-attached frame and
//! Z-Y-X Euler angles.

use nalgebra::Matrix3;

use crate::conditioning::NeighborIndex;
use crate::error::{Error, Result};
use crate::geometry::{is_rotation, wrap_degrees, EulerZYX, PlaneModel, Point3, RigidTransform, Vec3};
use crate::planes::SegmentedPlane;
use crate::segmentation::MaskRole;

pub const DEFAULT_BANDWIDTH: f64 = 0.025;
const SHIFT_TOLERANCE: f64 = 1e-4;
const MAX_SHIFT_ITERATIONS: usize = 100;
const GIMBAL_EPS: f64 = 1e-9;
/// Grid step of the uniform resampling of a plane's support, in meters.
pub const SUPPORT_SPACING: f64 = 0.001;

/// Flat-kernel mean shift started at the arithmetic mean.
pub fn mean_shift_centroid(points: &[Point3], bandwidth: f64) -> Result<Point3> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidParameter(format!("mean shift bandwidth must be positive, got {bandwidth}")));
    }
    let index = NeighborIndex::new(points);
    let mut current = Point3::from(points.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / points.len() as f64);
    for _ in 0..MAX_SHIFT_ITERATIONS {
        let hits = index.radius(&current, bandwidth);
        if hits.is_empty() {
            break;
        }
        let next = Point3::from(hits.iter().fold(Vec3::zeros(), |a, n| a + points[n.index].coords) / hits.len() as f64);
        let shift = (next - current).norm();
        current = next;
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }
    Ok(current)
}

/// Frame at `centroid` whose z axis is `normal` and whose x axis is the
/// sensor X axis projected onto the plane (sensor Y when X is parallel to
/// the normal).
pub fn build_frame(normal: &Vec3, centroid: &Point3) -> Result<RigidTransform> {
    let len = normal.norm();
    if !((len - 1.0).abs() <= 1e-9) {
        return Err(Error::NonUnitNormal(len));
    }
    let project = |axis: Vec3| axis - normal * axis.dot(normal);
    let mut x = project(Vec3::x());
    if x.norm() < 1e-6 {
        x = project(Vec3::y());
    }
    let x = x.normalize();
    let y = normal.cross(&x);
    RigidTransform::new(Matrix3::from_columns(&[x, y, *normal]), centroid.coords)
}

/// Z-Y-X Euler angles (degrees) of a rotation. At gimbal lock the X angle
/// is set to zero and the whole in-plane rotation goes to the Z angle.
pub fn euler_zyx_from_rotation(r: &Matrix3<f64>) -> Result<EulerZYX> {
    if !is_rotation(r, 1e-6) {
        return Err(Error::NotARotation);
    }
    let r20 = r[(2, 0)];
    let (theta1, theta2, theta3) = if r20.abs() > 1.0 - GIMBAL_EPS {
        let theta2 = if r20 < 0.0 { 90.0 } else { -90.0 };
        (f64::atan2(-r[(0, 1)], r[(1, 1)]).to_degrees(), theta2, 0.0)
    } else {
        (
            f64::atan2(r[(1, 0)], r[(0, 0)]).to_degrees(),
            f64::atan2(-r20, r[(0, 0)].hypot(r[(1, 0)])).to_degrees(),
            f64::atan2(r[(2, 1)], r[(2, 2)]).to_degrees(),
        )
    };
    Ok(EulerZYX::new(wrap_degrees(theta1), theta2, wrap_degrees(theta3)))
}

/// Pose of one detected surface. The centroid is in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose6DoF {
    pub centroid: Point3,
    pub euler: EulerZYX,
    pub plane: PlaneModel,
    pub inlier_count: usize,
    pub priority: MaskRole,
}

/// Frame axes for a plane whose normal faces the sensor: z is the approach
/// direction into the surface, i.e. the reversed normal.
pub fn approach_frame(plane: &PlaneModel, centroid: &Point3) -> Result<RigidTransform> {
    build_frame(&(-plane.normal()).normalize(), centroid)
}

/// Lower hull then upper hull, counter-clockwise, collinear points dropped.
fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in [pts.clone(), pts.into_iter().rev().collect()] {
        let start = hull.len();
        for p in pass {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Uniform samples, `spacing` apart, of the convex region the points cover
/// on `plane`. Falls back to the projected points when that region has no
/// area.
pub fn support_samples(points: &[Point3], plane: &PlaneModel, spacing: f64) -> Result<Vec<Point3>> {
    if !(spacing > 0.0) {
        return Err(Error::InvalidParameter(format!("support spacing must be positive, got {spacing}")));
    }
    let frame = approach_frame(plane, &Point3::origin())?;
    let (ex, ey) = (frame.rotation().column(0).into_owned(), frame.rotation().column(1).into_owned());
    let origin = Point3::from(-plane.d * plane.normal());
    let flat: Vec<(f64, f64)> = points.iter().map(|p| (p.coords.dot(&ex), p.coords.dot(&ey))).collect();
    let lift = |(u, v): (f64, f64)| origin + ex * u + ey * v;

    let hull = convex_hull(flat.clone());
    let n = hull.len();
    let inside = |p: (f64, f64)| {
        (0..n).all(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) >= 0.0
        })
    };
    let mut samples = Vec::new();
    if n >= 3 {
        let (lo, hi) = hull.iter().fold(((f64::MAX, f64::MAX), (f64::MIN, f64::MIN)), |(lo, hi), p| {
            ((lo.0.min(p.0), lo.1.min(p.1)), (hi.0.max(p.0), hi.1.max(p.1)))
        });
        // lattice centred on the bounding box so symmetric regions sample symmetrically
        let (nu, nv) = (((hi.0 - lo.0) / spacing).ceil() as usize + 1, ((hi.1 - lo.1) / spacing).ceil() as usize + 1);
        let (cu, cv) = ((lo.0 + hi.0) / 2.0, (lo.1 + hi.1) / 2.0);
        for j in 0..nv {
            let v = cv + (j as f64 - (nv - 1) as f64 / 2.0) * spacing;
            for i in 0..nu {
                let p = (cu + (i as f64 - (nu - 1) as f64 / 2.0) * spacing, v);
                if inside(p) {
                    samples.push(lift(p));
                }
            }
        }
    }
    if samples.is_empty() {
        samples = flat.into_iter().map(lift).collect();
    }
    Ok(samples)
}

/// Mean shift runs over a uniform resampling of the plane's support, so
/// uneven point density does not pull the centroid.
pub fn estimate_pose(plane: &SegmentedPlane, priority: MaskRole, bandwidth: f64) -> Result<Pose6DoF> {
    estimate_pose_on_support(plane, &plane.points, priority, bandwidth)
}

/// As [`estimate_pose`], with the support region taken from `support`
/// instead of the plane's own points.
pub fn estimate_pose_on_support(plane: &SegmentedPlane, support: &[Point3], priority: MaskRole, bandwidth: f64) -> Result<Pose6DoF> {
    if plane.points.is_empty() || support.is_empty() {
        return Err(Error::EmptyInput);
    }
    let samples = support_samples(support, &plane.model, SUPPORT_SPACING)?;
    let centroid = mean_shift_centroid(&samples, bandwidth)?;
    let frame = approach_frame(&plane.model, &centroid)?;
    let euler = euler_zyx_from_rotation(frame.rotation())?;
    Ok(Pose6DoF {
        centroid: Point3::from(centroid.coords * 1000.0),
        euler,
        plane: plane.model,
        inlier_count: plane.points.len(),
        priority,
    })
}
