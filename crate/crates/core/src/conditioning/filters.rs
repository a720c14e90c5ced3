use std::collections::BTreeMap;

use rayon::prelude::*;

use super::index::NeighborIndex;
use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec3};

/// Replaces the points of each occupied cube (side `leaf`, anchored at the
/// origin) by their centroid. Output is ordered by voxel key, z first.
pub fn voxel_grid_downsample(points: &[Point3], leaf: f64) -> Result<Vec<Point3>> {
    if !(leaf > 0.0 && leaf.is_finite()) {
        return Err(Error::InvalidParameter(format!("voxel leaf must be positive, got {leaf}")));
    }
    let mut cells: BTreeMap<(i64, i64, i64), (Vec3, usize)> = BTreeMap::new();
    for p in points {
        let key = ((p.z / leaf).floor() as i64, (p.y / leaf).floor() as i64, (p.x / leaf).floor() as i64);
        let e = cells.entry(key).or_insert((Vec3::zeros(), 0));
        e.0 += p.coords;
        e.1 += 1;
    }
    Ok(cells.into_values().map(|(sum, n)| Point3::from(sum / n as f64)).collect())
}

/// Mean distance from every point to its `k` nearest other points.
pub(crate) fn mean_knn_distances(points: &[Point3], index: &NeighborIndex, k: usize) -> Vec<f64> {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let hits = index.knn_excluding(i, k);
            hits.iter().map(|n| n.distance()).sum::<f64>() / hits.len() as f64
        })
        .collect()
}

/// Drops points whose mean k-NN distance exceeds `mean + alpha * stddev`
/// of that statistic over the whole cloud. Points at the threshold stay.
pub fn statistical_outlier_removal(points: &[Point3], k: usize, alpha: f64) -> Result<Vec<Point3>> {
    if k == 0 {
        return Err(Error::InvalidParameter("SOR neighbor count must be at least 1".into()));
    }
    if points.len() <= k {
        return Err(Error::TooFewPoints { needed: k, got: points.len() });
    }
    let index = NeighborIndex::new(points);
    let means = mean_knn_distances(points, &index, k);
    let n = means.len() as f64;
    let mu = means.iter().sum::<f64>() / n;
    let var = means.iter().map(|m| (m - mu) * (m - mu)).sum::<f64>() / (n - 1.0).max(1.0);
    let limit = mu + alpha * var.sqrt();
    Ok(points
        .iter()
        .zip(&means)
        .filter(|(_, &m)| m <= limit)
        .map(|(p, _)| *p)
        .collect())
}
