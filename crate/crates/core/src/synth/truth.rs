use serde::{Deserialize, Serialize};

use super::render::{render_hits, Hit};
use super::scene::SceneSpec;
use crate::geometry::{PlaneModel, Point3, Vec3};
use crate::pose::{approach_frame, euler_zyx_from_rotation};
use crate::segmentation::MaskRole;

/// Analytic pose of one box's top face, in the sensor frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub id: usize,
    pub centroid_mm: [f64; 3],
    /// Top face normal, facing the sensor.
    pub normal: [f64; 3],
    pub euler_zyx_deg: [f64; 3],
    /// Visible share of the top face compared with the box rendered alone.
    pub visibility: f64,
    /// Depth pixels landing on any face of this box.
    pub visible_pixels: usize,
    pub priority: MaskRole,
}

fn inside_convex(quad: &[(f64, f64); 4], p: (f64, f64)) -> bool {
    let mut sign = 0.0;
    for i in 0..4 {
        let (a, b) = (quad[i], quad[(i + 1) % 4]);
        let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        if cross.abs() < 1e-12 {
            continue;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    true
}

pub fn ground_truth(scene: &SceneSpec) -> Vec<GroundTruth> {
    let k = scene.depth_intrinsics();
    let full = render_hits(scene, None);
    let quads: Vec<[(f64, f64); 4]> = scene
        .boxes
        .iter()
        .map(|b| b.top_corners().map(|c| k.project(&scene.world_to_sensor(&c))))
        .collect();
    let tops: Vec<Point3> = scene
        .boxes
        .iter()
        .map(|b| {
            let h = b.half_extents();
            scene.world_to_sensor(&b.pose().apply(&Point3::new(0.0, 0.0, h.z)))
        })
        .collect();

    scene
        .boxes
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let centre = tops[i];
            let n_world = b.pose().apply_vector(&Vec3::z());
            let plane = PlaneModel::from_point_normal(&centre, &scene.world_to_sensor_vector(&n_world))
                .expect("box axes are unit vectors");
            let frame = approach_frame(&plane, &centre).expect("plane normal is unit");
            let euler = euler_zyx_from_rotation(frame.rotation()).expect("frame is a rotation");

            let alone = render_hits(scene, Some(i));
            let top_alone = alone.iter().filter(|h| **h == Hit::Box { index: i, top: true }).count();
            let top_seen = full.iter().filter(|h| **h == Hit::Box { index: i, top: true }).count();
            let visible_pixels = full.iter().filter(|h| matches!(h, Hit::Box { index, .. } if *index == i)).count();

            let nested = (0..scene.boxes.len()).any(|j| {
                j != i && tops[j].z > centre.z && quads[i].iter().all(|&c| inside_convex(&quads[j], c))
            });
            GroundTruth {
                id: i,
                centroid_mm: (centre.coords * 1000.0).into(),
                normal: plane.normal().into(),
                euler_zyx_deg: euler.as_array(),
                visibility: if top_alone == 0 { 0.0 } else { top_seen as f64 / top_alone as f64 },
                visible_pixels,
                priority: if nested { MaskRole::Child } else { MaskRole::Parent },
            }
        })
        .collect()
}
