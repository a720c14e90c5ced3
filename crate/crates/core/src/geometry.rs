//! Shared geometric primitives.
//!
//! Everything here lives in the depth sensor frame: x right, y down, z
//! forward from the sensor, lengths in meters.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

/// Native resolution of the time-of-flight sensor.
pub const DEFAULT_DEPTH_WIDTH: usize = 224;
pub const DEFAULT_DEPTH_HEIGHT: usize = 172;

/// A row-major grid of points with a parallel validity bitmap.
#[derive(Debug, Clone, PartialEq)]
pub struct OrganizedCloud {
    width: usize,
    height: usize,
    points: Vec<Point3>,
    valid: Vec<bool>,
}

impl OrganizedCloud {
    pub fn new(width: usize, height: usize, points: Vec<Point3>, valid: Vec<bool>) -> Result<Self> {
        if points.len() != width * height || valid.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "organized cloud {}x{} needs {} points, got {} points and {} flags",
                width,
                height,
                width * height,
                points.len(),
                valid.len()
            )));
        }
        if let Some(i) = (0..points.len()).find(|&i| valid[i] && !is_finite(&points[i])) {
            return Err(Error::InvalidParameter(format!("valid point {i} is not finite")));
        }
        Ok(OrganizedCloud { width, height, points, valid })
    }

    /// A cloud with every cell invalid.
    pub fn empty(width: usize, height: usize) -> Self {
        OrganizedCloud {
            width,
            height,
            points: vec![Point3::origin(); width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    /// Point at column `u`, row `v`, if the cell is valid.
    pub fn get(&self, u: usize, v: usize) -> Option<Point3> {
        if u >= self.width || v >= self.height {
            return None;
        }
        let i = v * self.width + u;
        self.valid[i].then(|| self.points[i])
    }

    pub fn set(&mut self, u: usize, v: usize, p: Option<Point3>) {
        let i = v * self.width + u;
        match p {
            Some(p) if is_finite(&p) => {
                self.points[i] = p;
                self.valid[i] = true;
            }
            _ => {
                self.points[i] = Point3::origin();
                self.valid[i] = false;
            }
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn valid_points(&self) -> impl Iterator<Item = Point3> + '_ {
        self.points.iter().zip(&self.valid).filter(|(_, &ok)| ok).map(|(p, _)| *p)
    }
}

fn is_finite(p: &Point3) -> bool {
    p.x.is_finite() && p.y.is_finite() && p.z.is_finite()
}

/// Plane `a·x + b·y + c·z + d = 0` with a unit normal facing the sensor
/// origin, i.e. `d >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl PlaneModel {
    pub fn normal(&self) -> Vec3 {
        Vec3::new(self.a, self.b, self.c)
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Plane through `point` with normal `normal` (any length), oriented
    /// toward the sensor.
    pub fn from_point_normal(point: &Point3, normal: &Vec3) -> Result<Self> {
        normalize_plane([normal.x, normal.y, normal.z, -normal.dot(&point.coords)])
    }

    pub fn signed_distance(&self, p: &Point3) -> f64 {
        plane_signed_distance(self, p)
    }

    /// Angle in degrees between the two normals, ignoring their sign.
    pub fn angle_to(&self, other: &PlaneModel) -> f64 {
        self.normal().dot(&other.normal()).abs().min(1.0).acos().to_degrees()
    }

    /// Orthogonal projection of `p` onto the plane.
    pub fn project(&self, p: &Point3) -> Point3 {
        p - self.normal() * self.signed_distance(p)
    }
}

/// Scales raw coefficients to a unit normal and orients the plane toward
/// the sensor origin (all four signs flip when `d < 0`).
pub fn normalize_plane(raw: [f64; 4]) -> Result<PlaneModel> {
    let [a, b, c, d] = raw;
    let norm = (a * a + b * b + c * c).sqrt();
    if !norm.is_finite() || norm < 1e-12 || !d.is_finite() {
        return Err(Error::DegenerateNormal(norm));
    }
    let s = if d < 0.0 { -1.0 / norm } else { 1.0 / norm };
    Ok(PlaneModel { a: a * s, b: b * s, c: c * s, d: d * s })
}

pub fn plane_signed_distance(plane: &PlaneModel, p: &Point3) -> f64 {
    plane.a * p.x + plane.b * p.y + plane.c * p.z + plane.d
}

/// Least-squares plane through a point set.
#[derive(Debug, Clone, Copy)]
pub struct PlaneFit {
    pub plane: PlaneModel,
    pub centroid: Point3,
    /// Covariance eigenvalues in ascending order, normalised by the point count.
    pub eigenvalues: [f64; 3],
}

/// Principal component fit: the normal is the eigenvector of the smallest
/// eigenvalue of the point covariance.
pub fn fit_plane_pca(points: &[Point3]) -> Result<PlaneFit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints { needed: 2, got: points.len() });
    }
    let (centroid, cov) = covariance(points.iter());
    let (values, vectors) = sorted_eigen(cov);
    if values[1] <= 1e-12 * values[2].max(f64::MIN_POSITIVE) || values[2] <= 0.0 {
        return Err(Error::DegenerateNeighborhood);
    }
    let plane = PlaneModel::from_point_normal(&centroid, &vectors[0])?;
    Ok(PlaneFit { plane, centroid, eigenvalues: values })
}

/// Mean and population covariance of a point set.
pub fn covariance<'a>(points: impl Iterator<Item = &'a Point3> + Clone) -> (Point3, Matrix3<f64>) {
    let mut sum = Vec3::zeros();
    let mut n = 0usize;
    for p in points.clone() {
        sum += p.coords;
        n += 1;
    }
    let mean = sum / n.max(1) as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    (Point3::from(mean), cov / n.max(1) as f64)
}

/// Eigen decomposition of a symmetric 3x3 matrix, ascending eigenvalues.
pub fn sorted_eigen(m: Matrix3<f64>) -> ([f64; 3], [Vec3; 3]) {
    let eig = SymmetricEigen::new(m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.map(|i| eig.eigenvalues[i]);
    let vectors = order.map(|i| eig.eigenvectors.column(i).into_owned().normalize());
    (values, vectors)
}

/// Proper rigid motion `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        if !is_rotation(&rotation, 1e-9) {
            return Err(Error::NotARotation);
        }
        Ok(RigidTransform { rotation, translation })
    }

    pub fn identity() -> Self {
        RigidTransform { rotation: Matrix3::identity(), translation: Vec3::zeros() }
    }

    pub fn from_translation(t: Vec3) -> Self {
        RigidTransform { rotation: Matrix3::identity(), translation: t }
    }

    /// Rotation of `angle_deg` about `axis`, followed by translation `t`.
    pub fn from_axis_angle(axis: &Vec3, angle_deg: f64, t: Vec3) -> Self {
        let rot = nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(*axis),
            angle_deg.to_radians(),
        );
        RigidTransform { rotation: *rot.matrix(), translation: t }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        apply_transform(self, p)
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -(rt * self.translation) }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

pub fn apply_transform(t: &RigidTransform, p: &Point3) -> Point3 {
    Point3::from(t.rotation * p.coords + t.translation)
}

pub fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    if r.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    err <= tol && (r.determinant() - 1.0).abs() <= tol
}

/// Intrinsic Z-Y-X Euler angles in degrees: `theta1` about Z, `theta2`
/// about the new Y, `theta3` about the newest X.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerZYX {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl EulerZYX {
    pub fn new(theta1: f64, theta2: f64, theta3: f64) -> Self {
        EulerZYX { theta1, theta2, theta3 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.theta1, self.theta2, self.theta3]
    }

    /// `Rz(theta1) · Ry(theta2) · Rx(theta3)`, written out element by element.
    pub fn to_rotation(&self) -> Matrix3<f64> {
        let (s1, c1) = self.theta1.to_radians().sin_cos();
        let (s2, c2) = self.theta2.to_radians().sin_cos();
        let (s3, c3) = self.theta3.to_radians().sin_cos();
        Matrix3::new(
            c1 * c2,
            c1 * s2 * s3 - c3 * s1,
            s1 * s3 + c1 * c3 * s2,
            c2 * s1,
            c1 * c3 + s1 * s2 * s3,
            c3 * s1 * s2 - c1 * s3,
            -s2,
            c2 * s3,
            c2 * c3,
        )
    }
}

/// Wraps an angle in degrees into (−180, 180].
pub fn wrap_degrees(a: f64) -> f64 {
    let mut w = a % 360.0;
    if w <= -180.0 {
        w += 360.0;
    } else if w > 180.0 {
        w -= 360.0;
    }
    w
}
