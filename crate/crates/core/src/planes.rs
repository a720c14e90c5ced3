//! Per-cluster iterative RANSAC plane segmentation, then grouping and
//! merging of fragments that belong to the same surface.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fit_plane_pca, PlaneModel, Point3, Vec3};

/// Inliers of a fitted plane.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedPlane {
    pub points: Vec<Point3>,
    pub model: PlaneModel,
    pub source_cluster: usize,
}

impl SegmentedPlane {
    /// Arithmetic mean of the inliers.
    pub fn centroid(&self) -> Point3 {
        let sum = self.points.iter().fold(Vec3::zeros(), |a, p| a + p.coords);
        Point3::from(sum / self.points.len().max(1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneParams {
    /// Inlier distance in meters.
    pub dist_thresh: f64,
    pub max_iter: usize,
    /// Extraction stops once fewer points than this remain.
    pub min_cluster_size: usize,
    /// Smallest inlier set accepted as a plane.
    pub min_object_size: usize,
    pub max_planes: usize,
}

impl Default for PlaneParams {
    fn default() -> Self {
        PlaneParams { dist_thresh: 0.005, max_iter: 200, min_cluster_size: 30, min_object_size: 30, max_planes: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeParams {
    pub angle_tol_deg: f64,
    /// Maximum centroid separation in meters.
    pub centroid_thresh: f64,
    /// Maximum distance from one centroid to the other plane, in meters.
    pub perp_thresh: f64,
    /// Inlier distance applied after refitting a merged plane.
    pub dist_thresh: f64,
}

impl Default for MergeParams {
    fn default() -> Self {
        MergeParams { angle_tol_deg: 5.0, centroid_thresh: 0.05, perp_thresh: 0.005, dist_thresh: 0.005 }
    }
}

fn inliers_of(points: &[Point3], model: &PlaneModel, thresh: f64) -> Vec<usize> {
    (0..points.len()).filter(|&i| model.signed_distance(&points[i]).abs() <= thresh).collect()
}

/// RANSAC over `max_iter` three-point hypotheses, then a least-squares
/// refit on the best consensus set and a final inlier pass against it.
pub fn ransac_plane(cluster: &[Point3], dist_thresh: f64, max_iter: usize, seed: u64) -> Result<(Vec<usize>, PlaneModel)> {
    ransac_with_rng(cluster, dist_thresh, max_iter, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn ransac_with_rng(cluster: &[Point3], dist_thresh: f64, max_iter: usize, rng: &mut impl Rng) -> Result<(Vec<usize>, PlaneModel)> {
    if !(dist_thresh > 0.0) {
        return Err(Error::InvalidParameter(format!("RANSAC threshold must be positive, got {dist_thresh}")));
    }
    if cluster.len() < 3 {
        return Err(Error::TooFewPoints { needed: 2, got: cluster.len() });
    }
    let whole = fit_plane_pca(cluster).map_err(|_| Error::DegenerateConfiguration("no three non-collinear points".into()))?;

    let mut best: Option<(usize, PlaneModel)> = None;
    for _ in 0..max_iter {
        let idx = sample(rng, cluster.len(), 3);
        let (a, b, c) = (cluster[idx.index(0)], cluster[idx.index(1)], cluster[idx.index(2)]);
        let normal = (b - a).cross(&(c - a));
        let Ok(model) = PlaneModel::from_point_normal(&a, &normal) else {
            continue;
        };
        let count = cluster.iter().filter(|p| model.signed_distance(p).abs() <= dist_thresh).count();
        if best.is_none_or(|(n, _)| count > n) {
            best = Some((count, model));
        }
    }
    let model = best.map_or(whole.plane, |(_, m)| m);
    let inliers = inliers_of(cluster, &model, dist_thresh);
    let subset: Vec<Point3> = inliers.iter().map(|&i| cluster[i]).collect();
    match fit_plane_pca(&subset) {
        Ok(refit) => Ok((inliers_of(cluster, &refit.plane, dist_thresh), refit.plane)),
        Err(_) => Ok((inliers, model)),
    }
}

fn same_model(a: &PlaneModel, b: &PlaneModel, dist_thresh: f64) -> bool {
    a.angle_to(b) < 0.5 && (a.d - b.d).abs() < dist_thresh
}

/// Repeatedly fits and removes planes from one cluster. Stops when too
/// few points remain, a fit is too small, the previous plane is found
/// again, or `max_planes` is reached. The random stream is keyed by
/// `(seed, cluster_id)`.
pub fn extract_planes_iterative(cluster: &[Point3], params: &PlaneParams, seed: u64, cluster_id: usize) -> Vec<SegmentedPlane> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cluster_id as u64);
    let mut remaining: Vec<Point3> = cluster.to_vec();
    let mut planes: Vec<SegmentedPlane> = Vec::new();
    while remaining.len() >= params.min_cluster_size && remaining.len() >= 3 && planes.len() < params.max_planes {
        let Ok((inliers, model)) = ransac_with_rng(&remaining, params.dist_thresh, params.max_iter, &mut rng) else {
            break;
        };
        if inliers.len() < params.min_object_size {
            break;
        }
        if planes.last().is_some_and(|p| same_model(&p.model, &model, params.dist_thresh)) {
            break;
        }
        let mut taken = vec![false; remaining.len()];
        for &i in &inliers {
            taken[i] = true;
        }
        let points = inliers.iter().map(|&i| remaining[i]).collect();
        planes.push(SegmentedPlane { points, model, source_cluster: cluster_id });
        remaining = remaining.into_iter().zip(taken).filter(|(_, t)| !t).map(|(p, _)| p).collect();
    }
    planes
}

/// Two fragments overlap when their centroids are close and the second
/// centroid lies near the first plane.
pub fn check_overlapping(p1: &SegmentedPlane, p2: &SegmentedPlane, centroid_thresh: f64, perp_thresh: f64) -> bool {
    let (c1, c2) = (p1.centroid(), p2.centroid());
    (c1 - c2).norm() < centroid_thresh && p1.model.signed_distance(&c2).abs() < perp_thresh
}

/// Planes combined into one surface.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneGroup {
    /// Indices into the input list, seed first.
    pub members: Vec<usize>,
    pub merged: SegmentedPlane,
}

fn mergeable(a: &SegmentedPlane, b: &SegmentedPlane, params: &MergeParams) -> bool {
    a.model.normal().dot(&b.model.normal()).abs() >= params.angle_tol_deg.to_radians().cos()
        && check_overlapping(a, b, params.centroid_thresh, params.perp_thresh)
}

fn merge_members(planes: &[SegmentedPlane], members: &[usize], params: &MergeParams) -> SegmentedPlane {
    let seed = &planes[members[0]];
    if members.len() == 1 {
        return seed.clone();
    }
    let union: Vec<Point3> = members.iter().flat_map(|&i| planes[i].points.iter().copied()).collect();
    let model = fit_plane_pca(&union).map_or(seed.model, |f| f.plane);
    let points = union.into_iter().filter(|p| model.signed_distance(p).abs() <= params.dist_thresh).collect();
    SegmentedPlane { points, model, source_cluster: seed.source_cluster }
}

fn group_once(planes: &[SegmentedPlane], params: &MergeParams) -> Vec<PlaneGroup> {
    let mut visited = vec![false; planes.len()];
    let mut groups = Vec::new();
    for m in 0..planes.len() {
        if visited[m] {
            continue;
        }
        visited[m] = true;
        let mut members = vec![m];
        for n in m + 1..planes.len() {
            if !visited[n] && mergeable(&planes[m], &planes[n], params) {
                visited[n] = true;
                members.push(n);
            }
        }
        let merged = merge_members(planes, &members, params);
        groups.push(PlaneGroup { members, merged });
    }
    groups
}

/// Greedy grouping in input order, repeated on its own output until no two
/// planes satisfy both the angle and the overlap test. Output follows group
/// seed order.
pub fn group_and_merge_planes(planes: &[SegmentedPlane], params: &MergeParams) -> Vec<PlaneGroup> {
    let mut groups: Vec<PlaneGroup> = group_once(planes, params);
    loop {
        let current: Vec<SegmentedPlane> = groups.iter().map(|g| g.merged.clone()).collect();
        let next = group_once(&current, params);
        if next.len() == groups.len() {
            return groups;
        }
        groups = next
            .into_iter()
            .map(|g| PlaneGroup {
                members: g.members.iter().flat_map(|&i| groups[i].members.iter().copied()).collect(),
                merged: g.merged,
            })
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Uniform};

    fn patch(centre: Point3, u: Vec3, v: Vec3, half: f64, step: f64) -> Vec<Point3> {
        let n = (half / step).round() as i32;
        let mut out = Vec::new();
        for j in -n..=n {
            for i in -n..=n {
                out.push(centre + u * (i as f64 * step) + v * (j as f64 * step));
            }
        }
        out
    }

    fn flat(centre: Point3, half: f64) -> Vec<Point3> {
        patch(centre, Vec3::x(), Vec3::y(), half, 0.005)
    }

    fn seg(points: Vec<Point3>) -> SegmentedPlane {
        let model = fit_plane_pca(&points).unwrap().plane;
        SegmentedPlane { points, model, source_cluster: 0 }
    }

    #[test]
    fn exact_plane_all_inliers() {
        let pts: Vec<Point3> = (0..100).map(|i| Point3::new((i % 10) as f64 * 0.01, (i / 10) as f64 * 0.01, 0.5)).collect();
        let (inliers, model) = ransac_plane(&pts, 0.001, 200, 1).unwrap();
        assert_eq!(inliers.len(), 100);
        assert!((model.c + 1.0).abs() < 1e-12 && (model.d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn collinear_is_degenerate() {
        let pts: Vec<Point3> = (0..3).map(|i| Point3::new(i as f64, 0.0, 1.0)).collect();
        assert!(matches!(ransac_plane(&pts, 0.001, 10, 0), Err(Error::DegenerateConfiguration(_))));
    }

    fn mixed_cloud(seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Uniform::new(-0.15, 0.15).unwrap();
        let mut pts: Vec<Point3> = (0..70).map(|_| Point3::new(u.sample(&mut rng), u.sample(&mut rng), 0.5)).collect();
        pts.extend((0..30).map(|_| Point3::new(u.sample(&mut rng), u.sample(&mut rng), 0.5 + u.sample(&mut rng))));
        pts
    }

    #[test]
    fn mixed_inliers_and_outliers() {
        let pts = mixed_cloud(42);
        let (inliers, model) = ransac_plane(&pts, 0.002, 200, 42).unwrap();
        assert!(inliers.len() >= 70);
        assert!(model.normal().dot(&Vec3::z()).abs() >= 0.5f64.to_radians().cos());
    }

    #[test]
    fn single_plane_cluster() {
        let planes = extract_planes_iterative(&flat(Point3::new(0.0, 0.0, 0.8), 0.05), &PlaneParams::default(), 3, 0);
        assert_eq!(planes.len(), 1);
    }

    #[test]
    fn dihedral_gives_two_perpendicular_planes() {
        // two faces of a box meeting along x = 0.1, z = 0.8
        let mut pts = patch(Point3::new(0.0, 0.0, 0.8), Vec3::x(), Vec3::y(), 0.1, 0.005);
        pts.extend(patch(Point3::new(0.1, 0.0, 0.905), Vec3::z(), Vec3::y(), 0.1, 0.005).into_iter().filter(|p| p.z > 0.8));
        let planes = extract_planes_iterative(&pts, &PlaneParams::default(), 9, 0);
        let face_normals = [Vec3::z(), Vec3::x()];
        assert_eq!(planes.len(), 2);
        let angle = planes[0].model.normal().dot(&planes[1].model.normal()).abs().acos().to_degrees();
        assert!((angle - 90.0).abs() <= 1.0, "{angle}");
        for p in &planes {
            let best = face_normals.iter().map(|n| p.model.normal().dot(n).abs()).fold(0.0, f64::max);
            assert!(best.acos().to_degrees() <= 1.0);
        }
        let total: usize = planes.iter().map(|p| p.points.len()).sum();
        assert!(total <= pts.len());
    }

    #[test]
    fn small_cluster_gives_nothing() {
        let pts: Vec<Point3> = flat(Point3::new(0.0, 0.0, 0.8), 0.01);
        assert!(pts.len() < 30);
        assert!(extract_planes_iterative(&pts, &PlaneParams::default(), 0, 0).is_empty());
    }

    #[test]
    fn overlap_examples() {
        let a = seg(flat(Point3::new(0.0, 0.0, 0.8), 0.03));
        assert!(check_overlapping(&a, &a, 0.05, 0.005));
        let far = seg(flat(Point3::new(0.2, 0.0, 0.8), 0.03));
        assert!(!check_overlapping(&a, &far, 0.05, 0.005));
        let above = seg(flat(Point3::new(0.0, 0.0, 0.77), 0.03));
        assert!(!check_overlapping(&a, &above, 0.05, 0.005));
    }

    #[test]
    fn fragments_merge_and_stacked_tops_do_not() {
        let left: Vec<Point3> = flat(Point3::new(0.0, 0.0, 0.8), 0.04).into_iter().filter(|p| p.x < 0.0).collect();
        let right: Vec<Point3> = flat(Point3::new(0.0, 0.0, 0.8), 0.04).into_iter().filter(|p| p.x >= 0.0).collect();
        let total = left.len() + right.len();
        let groups = group_and_merge_planes(&[seg(left), seg(right)], &MergeParams::default());
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].merged.points.len(), total);

        let tops = [seg(flat(Point3::new(0.0, 0.0, 0.8), 0.03)), seg(flat(Point3::new(0.0, 0.0, 0.75), 0.03))];
        assert_eq!(group_and_merge_planes(&tops, &MergeParams::default()).len(), 2);
        assert!(group_and_merge_planes(&[], &MergeParams::default()).is_empty());
    }

    fn fragments() -> impl Strategy<Value = Vec<SegmentedPlane>> {
        prop::collection::vec((-3i32..3, -3i32..3, 0i32..3, -10.0f64..10.0), 0..8).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(k, (x, y, z, tilt))| {
                    let n = Vec3::new(tilt.to_radians().sin(), 0.0, tilt.to_radians().cos());
                    let u = Vec3::y().cross(&n).normalize();
                    let c = Point3::new(x as f64 * 0.02, y as f64 * 0.02, 0.8 + z as f64 * 0.002);
                    let mut s = seg(patch(c, u, Vec3::y(), 0.02, 0.005));
                    s.source_cluster = k;
                    s
                })
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn merge_is_idempotent_and_unique(planes in fragments()) {
            let params = MergeParams::default();
            let merged: Vec<SegmentedPlane> = group_and_merge_planes(&planes, &params).into_iter().map(|g| g.merged).collect();
            for i in 0..merged.len() {
                for j in i + 1..merged.len() {
                    prop_assert!(!mergeable(&merged[i], &merged[j], &params));
                }
            }
            let again = group_and_merge_planes(&merged, &params);
            prop_assert_eq!(again.len(), merged.len());
            for (g, m) in again.iter().zip(&merged) {
                prop_assert_eq!(&g.merged, m);
            }
            for p in &merged {
                for q in &p.points {
                    prop_assert!(p.model.signed_distance(q).abs() <= params.dist_thresh);
                }
            }
        }

        #[test]
        fn extraction_is_sound_disjoint_and_seeded(seed in 0u64..500) {
            let mut pts = patch(Point3::new(0.0, 0.0, 0.8), Vec3::x(), Vec3::y(), 0.04, 0.005);
            pts.extend(patch(Point3::new(0.045, 0.0, 0.845), Vec3::z(), Vec3::y(), 0.04, 0.005));
            let params = PlaneParams::default();
            let planes = extract_planes_iterative(&pts, &params, seed, 3);
            prop_assert_eq!(&planes, &extract_planes_iterative(&pts, &params, seed, 3));
            let mut used = std::collections::HashSet::new();
            for p in &planes {
                prop_assert!(p.points.len() >= params.min_object_size);
                for q in &p.points {
                    prop_assert!(p.model.signed_distance(q).abs() <= params.dist_thresh);
                    let key = (q.x.to_bits(), q.y.to_bits(), q.z.to_bits());
                    prop_assert!(used.insert(key), "point reused");
                    prop_assert!(pts.contains(q));
                }
            }
        }
    }
}
