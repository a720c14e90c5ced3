use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::scene::{Intrinsics, SceneSpec};
use crate::geometry::{OrganizedCloud, Point3, Vec3};
use crate::segmentation::GrayImage;

/// What a camera ray hits first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hit {
    Miss,
    Floor,
    Box { index: usize, top: bool },
}

struct Solid {
    index: usize,
    inv_rot: Matrix3<f64>,
    center: Vec3,
    half: Vec3,
}

struct Caster {
    origin: Point3,
    solids: Vec<Solid>,
    half_length: f64,
    half_width: f64,
}

impl Caster {
    fn new(scene: &SceneSpec, only: Option<usize>) -> Self {
        let solids = scene
            .boxes
            .iter()
            .enumerate()
            .filter(|(i, _)| only.is_none_or(|o| o == *i))
            .map(|(index, b)| {
                let pose = b.pose();
                Solid { index, inv_rot: pose.rotation().transpose(), center: *pose.translation(), half: b.half_extents() }
            })
            .collect();
        Caster {
            origin: scene.camera_center(),
            solids,
            half_length: scene.bin.length_mm / 2000.0,
            half_width: scene.bin.width_mm / 2000.0,
        }
    }

    /// Nearest hit along `origin + t·dir`, `t > 0`.
    fn cast(&self, dir: &Vec3) -> (f64, Hit) {
        let mut best = (f64::INFINITY, Hit::Miss);
        if dir.z < 0.0 {
            let t = -self.origin.z / dir.z;
            let p = self.origin + dir * t;
            if p.x.abs() <= self.half_length && p.y.abs() <= self.half_width {
                best = (t, Hit::Floor);
            }
        }
        for s in &self.solids {
            let o = s.inv_rot * (self.origin.coords - s.center);
            let d = s.inv_rot * dir;
            let mut t_near = f64::NEG_INFINITY;
            let mut t_far = f64::INFINITY;
            let mut near_axis = 0;
            let mut miss = false;
            for a in 0..3 {
                if d[a].abs() < 1e-15 {
                    if o[a].abs() > s.half[a] {
                        miss = true;
                        break;
                    }
                    continue;
                }
                let (t1, t2) = ((-s.half[a] - o[a]) / d[a], (s.half[a] - o[a]) / d[a]);
                let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
                if lo > t_near {
                    t_near = lo;
                    near_axis = a;
                }
                t_far = t_far.min(hi);
            }
            if miss || t_near > t_far || t_near <= 0.0 {
                continue;
            }
            if t_near < best.0 {
                // entering through +z means coming from above the top face
                let top = near_axis == 2 && d[2] < 0.0;
                best = (t_near, Hit::Box { index: s.index, top });
            }
        }
        best
    }
}

/// First hit of the ray through pixel `(u, v)` of a camera at the scene's
/// mount point; returns the sensor-frame point, if any.
pub fn cast_ray(scene: &SceneSpec, k: &Intrinsics, u: f64, v: f64) -> (Option<Point3>, Hit) {
    let caster = Caster::new(scene, None);
    cast_pixel(scene, &caster, k, u, v)
}

fn cast_pixel(scene: &SceneSpec, caster: &Caster, k: &Intrinsics, u: f64, v: f64) -> (Option<Point3>, Hit) {
    let ray = k.ray(u, v);
    let (t, hit) = caster.cast(&scene.sensor_to_world_vector(&ray));
    match hit {
        Hit::Miss => (None, hit),
        _ => (Some(Point3::from(ray * t)), hit),
    }
}

fn render_with(scene: &SceneSpec, caster: &Caster, k: &Intrinsics) -> Vec<(Option<Point3>, Hit)> {
    (0..k.width * k.height)
        .into_par_iter()
        .map(|i| cast_pixel(scene, caster, k, (i % k.width) as f64, (i / k.width) as f64))
        .collect()
}

/// Per depth pixel hits; `only` restricts the scene to a single box.
pub fn render_hits(scene: &SceneSpec, only: Option<usize>) -> Vec<Hit> {
    let caster = Caster::new(scene, only);
    render_with(scene, &caster, &scene.depth_intrinsics()).into_iter().map(|(_, h)| h).collect()
}

/// Noiseless organized cloud in the sensor frame, in meters.
pub fn render_depth(scene: &SceneSpec) -> OrganizedCloud {
    let k = scene.depth_intrinsics();
    let caster = Caster::new(scene, None);
    let hits = render_with(scene, &caster, &k);
    let valid = hits.iter().map(|(p, _)| p.is_some()).collect();
    let points = hits.into_iter().map(|(p, _)| p.unwrap_or_else(Point3::origin)).collect();
    OrganizedCloud::new(k.width, k.height, points, valid).expect("render produces a full grid")
}

/// Box top faces at their intensity over the floor intensity, hard edges.
pub fn render_image(scene: &SceneSpec) -> GrayImage {
    let k = scene.rgb_intrinsics();
    let caster = Caster::new(scene, None);
    let data = (0..k.width * k.height)
        .into_par_iter()
        .map(|i| {
            let ray = k.ray((i % k.width) as f64, (i / k.width) as f64);
            match caster.cast(&scene.sensor_to_world_vector(&ray)).1 {
                Hit::Box { index, top: true } => scene.boxes[index].face_intensity,
                _ => scene.floor_intensity,
            }
        })
        .collect();
    GrayImage::new(k.width, k.height, data).expect("render produces a full image")
}

/// Gaussian noise along each point's viewing ray. Each pixel draws from its
/// own stream, so the result does not depend on iteration order.
pub fn add_depth_noise(cloud: &OrganizedCloud, sigma: f64, seed: u64) -> OrganizedCloud {
    if sigma <= 0.0 {
        return cloud.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    let points = cloud
        .points()
        .par_iter()
        .zip(cloud.valid().par_iter())
        .enumerate()
        .map(|(i, (p, &valid))| {
            if !valid {
                return *p;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let dir = p.coords.normalize();
            p + dir * normal.sample(&mut rng)
        })
        .collect();
    OrganizedCloud::new(cloud.width(), cloud.height(), points, cloud.valid().to_vec()).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::BoxSpec;

    #[test]
    fn empty_bin_sees_the_floor() {
        let scene = SceneSpec::default();
        let cloud = render_depth(&scene);
        let k = scene.depth_intrinsics();
        let centre = cloud.get(k.cx as usize, k.cy as usize).unwrap();
        assert!((centre.z - 1.2).abs() < 1e-9);
        for p in cloud.valid_points() {
            assert!((p.z - 1.2).abs() < 1e-9);
        }
        let img = render_image(&scene);
        assert!(img.data().iter().all(|&v| v == scene.floor_intensity));
    }

    #[test]
    fn centred_box_is_closer_by_its_height() {
        let scene = SceneSpec::with_boxes(vec![BoxSpec::resting([200.0, 150.0, 100.0], 0.0, 0.0, 0.0, 0.0, 200)]);
        let cloud = render_depth(&scene);
        let k = scene.depth_intrinsics();
        let p = cloud.get(k.cx as usize, k.cy as usize).unwrap();
        assert!((p.z - 1.1).abs() < 1e-9);
    }

    #[test]
    fn occluded_box_gets_no_top_pixels() {
        let scene = SceneSpec::with_boxes(vec![
            BoxSpec::resting([100.0, 80.0, 50.0], 0.0, 0.0, 0.0, 0.0, 120),
            BoxSpec::resting([300.0, 250.0, 60.0], 0.0, 0.0, 100.0, 0.0, 200),
        ]);
        let hits = render_hits(&scene, None);
        assert!(!hits.iter().any(|h| matches!(h, Hit::Box { index: 0, .. })));
    }

    #[test]
    fn image_edges_match_projection() {
        let scene = SceneSpec::with_boxes(vec![BoxSpec::resting([200.0, 150.0, 100.0], 0.0, 0.0, 0.0, 0.0, 200)]);
        let img = render_image(&scene);
        let k = scene.rgb_intrinsics();
        // top face at z = 0.1 m, x = ±0.1 m, 1.1 m from the camera
        let right = k.fx * 0.1 / 1.1 + k.cx;
        let row = k.cy as usize;
        let col = right.floor() as usize;
        assert_eq!(img.get(col, row), 200);
        assert_eq!(img.get(col + 1, row), scene.floor_intensity);
    }

    #[test]
    fn adjacent_boxes_share_an_edge() {
        let scene = SceneSpec::with_boxes(vec![
            BoxSpec::resting([150.0, 200.0, 80.0], -75.0, 0.0, 0.0, 0.0, 180),
            BoxSpec::resting([150.0, 200.0, 80.0], 75.0, 0.0, 0.0, 0.0, 220),
        ]);
        let img = render_image(&scene);
        let k = scene.rgb_intrinsics();
        let row = k.cy as usize;
        let col = k.cx as usize;
        assert_eq!(img.get(col - 1, row), 180);
        assert_eq!(img.get(col + 1, row), 220);
    }

    #[test]
    fn noise_is_seeded_and_scaled() {
        let scene = SceneSpec::default();
        let cloud = render_depth(&scene);
        assert_eq!(add_depth_noise(&cloud, 0.0, 5), cloud);
        let a = add_depth_noise(&cloud, 0.002, 5);
        assert_eq!(a, add_depth_noise(&cloud, 0.002, 5));
        let disp: Vec<f64> = a
            .points()
            .iter()
            .zip(cloud.points())
            .zip(cloud.valid())
            .filter(|(_, &v)| v)
            .map(|((p, q), _)| (p - q).dot(&q.coords.normalize()))
            .collect();
        assert!(disp.len() >= 10_000);
        let mean = disp.iter().sum::<f64>() / disp.len() as f64;
        let sd = (disp.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (disp.len() - 1) as f64).sqrt();
        assert!((sd - 0.002).abs() < 0.0002, "{sd}");
    }
}
