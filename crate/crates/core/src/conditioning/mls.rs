use nalgebra::{DMatrix, DVector, Matrix3};
use rayon::prelude::*;

use super::index::NeighborIndex;
use crate::error::{Error, Result};
use crate::geometry::{sorted_eigen, Point3, Vec3};

/// Number of coefficients of a bivariate polynomial of the given degree.
fn basis_len(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

fn basis(x: f64, y: f64, order: usize) -> Vec<f64> {
    if order == 1 {
        vec![1.0, x, y]
    } else {
        vec![1.0, x, y, x * x, x * y, y * y]
    }
}

/// Moving least squares projection.
///
/// Each point's radius neighbourhood gets a weighted tangent frame and a
/// weighted polynomial height field (Gaussian weights, bandwidth
/// `radius / 2`); the point is replaced by the surface value above its own
/// tangent coordinates. Sparse or degenerate neighbourhoods pass through.
pub fn mls_resample(points: &[Point3], radius: f64, order: usize) -> Result<Vec<Point3>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("MLS radius must be positive, got {radius}")));
    }
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidParameter(format!("MLS order must be 1 or 2, got {order}")));
    }
    let index = NeighborIndex::new(points);
    Ok(points
        .par_iter()
        .map(|p| project_point(&index, p, radius, order).unwrap_or(*p))
        .collect())
}

fn project_point(index: &NeighborIndex, p: &Point3, radius: f64, order: usize) -> Option<Point3> {
    let hits = index.radius(p, radius);
    if hits.len() < basis_len(order) {
        return None;
    }
    let h2 = (radius / 2.0).powi(2);
    let pts = index.points();
    let weights: Vec<f64> = hits.iter().map(|n| (-n.distance_squared / h2).exp()).collect();
    let wsum: f64 = weights.iter().sum();
    let mean = hits.iter().zip(&weights).fold(Vec3::zeros(), |a, (n, w)| a + pts[n.index].coords * *w) / wsum;
    let mut cov = Matrix3::zeros();
    for (n, w) in hits.iter().zip(&weights) {
        let d = pts[n.index].coords - mean;
        cov += d * d.transpose() * *w;
    }
    let (values, vectors) = sorted_eigen(cov / wsum);
    if values[1] <= 1e-12 * values[2].max(f64::MIN_POSITIVE) {
        return None;
    }
    let (normal, u) = (vectors[0], vectors[2]);
    let v = normal.cross(&u);

    // local coordinates scaled by the radius keep the normal equations well conditioned
    let local = |q: &Vec3| {
        let d = q - mean;
        (d.dot(&u) / radius, d.dot(&v) / radius, d.dot(&normal))
    };
    let m = basis_len(order);
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (n, w) in hits.iter().zip(&weights) {
        let (x, y, z) = local(&pts[n.index].coords);
        let phi = basis(x, y, order);
        for r in 0..m {
            b[r] += w * phi[r] * z;
            for c in 0..m {
                a[(r, c)] += w * phi[r] * phi[c];
            }
        }
    }
    let coeffs = a.cholesky()?.solve(&b);
    let (x0, y0, _) = local(&p.coords);
    let height: f64 = basis(x0, y0, order).iter().zip(coeffs.iter()).map(|(f, c)| f * c).sum();
    Some(Point3::from(mean + u * (x0 * radius) + v * (y0 * radius) + normal * height))
}
