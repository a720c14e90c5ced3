use rayon::prelude::*;

use super::index::NeighborIndex;
use crate::error::{Error, Result};
use crate::geometry::{covariance, sorted_eigen, Point3, Vec3};

/// PCA normal of the points within `radius` of `p`, flipped to face
/// `viewpoint`.
pub fn estimate_normal(index: &NeighborIndex, p: &Point3, radius: f64, viewpoint: &Point3) -> Result<Vec3> {
    let hits = index.radius(p, radius);
    if hits.len() < 3 {
        return Err(Error::InsufficientNeighbors { found: hits.len() });
    }
    let pts = index.points();
    let (_, cov) = covariance(hits.iter().map(|n| &pts[n.index]));
    let (values, vectors) = sorted_eigen(cov);
    if values[1] <= 1e-12 * values[2].max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateNeighborhood);
    }
    let n = vectors[0];
    Ok(if n.dot(&(viewpoint - p)) < 0.0 { -n } else { n })
}

/// Half difference of two unit normals; its norm lies in [0, 1].
pub fn difference_of_normals(small: &Vec3, large: &Vec3) -> Vec3 {
    (small - large) / 2.0
}

/// Per-point normals at a small and a large support radius.
#[derive(Debug, Clone)]
pub struct NormalField {
    pub r_small: f64,
    pub r_large: f64,
    pub small: Vec<Option<Vec3>>,
    pub large: Vec<Option<Vec3>>,
}

impl NormalField {
    pub fn compute(points: &[Point3], r_small: f64, r_large: f64, viewpoint: &Point3) -> Result<Self> {
        if !(r_small > 0.0 && r_small < r_large) {
            return Err(Error::InvalidRadii { small: r_small, large: r_large });
        }
        let index = NeighborIndex::new(points);
        let (small, large) = points
            .par_iter()
            .map(|p| {
                (
                    estimate_normal(&index, p, r_small, viewpoint).ok(),
                    estimate_normal(&index, p, r_large, viewpoint).ok(),
                )
            })
            .unzip();
        Ok(NormalField { r_small, r_large, small, large })
    }

    /// Difference-of-normals vector of point `i`, if both normals exist.
    pub fn don(&self, i: usize) -> Option<Vec3> {
        Some(difference_of_normals(self.small[i].as_ref()?, self.large[i].as_ref()?))
    }
}

/// Keeps the points whose difference-of-normals norm is below `threshold`.
/// Normals face the sensor origin; points without a normal at either
/// radius are dropped.
pub fn don_filter(points: &[Point3], r_small: f64, r_large: f64, threshold: f64) -> Result<Vec<Point3>> {
    let field = NormalField::compute(points, r_small, r_large, &Point3::origin())?;
    Ok(points
        .iter()
        .enumerate()
        .filter(|(i, _)| field.don(*i).is_some_and(|d| d.norm() < threshold))
        .map(|(_, p)| *p)
        .collect())
}
