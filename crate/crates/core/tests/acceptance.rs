mod common;

use std::process::ExitCode;
use std::time::Instant;

use binpick_core::clustering::{core_distances, minimum_spanning_tree, mutual_reachability};
use binpick_core::conditioning::{statistical_outlier_removal, voxel_grid_downsample, NeighborIndex, difference_of_normals};
use binpick_core::geometry::{is_rotation, normalize_plane, EulerZYX, Point3, Vec3};
use binpick_core::pipeline::{run_pipeline, verify_against_ground_truth, PoseRecord, DEFAULT_MATCH_RADIUS_MM};
use binpick_core::planes::ransac_plane;
use binpick_core::pose::{build_frame, euler_zyx_from_rotation};
use binpick_core::segmentation::{generate_masks, Phase};
use binpick_core::synth::{ground_truth, BoxSpec, SceneSpec};
use binpick_core::{pipeline::segment, MaskRole};
use common::{cluttered_scene, combined, four_box_scene, tilted_scene, Rendered, TILTS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = fn() -> Outcome;

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn max3(acc: &mut [f64; 3], v: [f64; 3]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a = a.max(x);
    }
}

fn noiseless_recovery() -> Outcome {
    let mut secs = 0.0;
    let mut worst_t = [0.0f64; 3];
    let mut worst_r = [0.0f64; 3];
    let mut failures = Vec::new();
    for (tx, ty) in TILTS {
        let scene = tilted_scene(tx, ty);
        let r = Rendered::new(&scene);
        let start = Instant::now();
        let (c, p) = r.both_phases(&r.clean);
        secs += start.elapsed().as_secs_f64();
        let poses = combined(c, p);
        let table = verify_against_ground_truth(&poses, &ground_truth(&scene), DEFAULT_MATCH_RADIUS_MM);
        if poses.len() != 1 || table.matches.len() != 1 {
            failures.push(format!("tilt ({tx},{ty}): {} poses, {} matched", poses.len(), table.matches.len()));
            continue;
        }
        let m = &table.matches[0];
        max3(&mut worst_t, m.translation_mm);
        max3(&mut worst_r, m.rotation_deg);
        if m.translation_mm.iter().any(|e| *e > 1.0) || m.rotation_deg.iter().any(|e| *e > 0.5) {
            failures.push(format!("tilt ({tx},{ty}): {:.3?} mm {:.3?} deg", m.translation_mm, m.rotation_deg));
        }
    }
    let pass = failures.is_empty() && secs < 10.0;
    outcome(
        pass,
        format!(
            "worst {:.3?} mm, {:.3?} deg, {secs:.2} s pipeline{}",
            worst_t,
            worst_r,
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn noisy_accuracy() -> Outcome {
    let mut sums_t = [0.0; 3];
    let mut sums_r = [0.0; 3];
    let mut n = 0usize;
    let mut misses = 0usize;
    for (tx, ty) in TILTS {
        let scene = tilted_scene(tx, ty);
        let truth = ground_truth(&scene);
        let r = Rendered::new(&scene);
        let tables: Vec<_> = (0..20u64)
            .into_par_iter()
            .map(|seed| {
                let cloud = r.noisy(0.002, seed);
                let (c, p) = r.both_phases(&cloud);
                verify_against_ground_truth(&combined(c, p), &truth, DEFAULT_MATCH_RADIUS_MM)
            })
            .collect();
        for t in tables {
            misses += t.misses;
            for m in t.matches {
                for d in 0..3 {
                    sums_t[d] += m.translation_mm[d];
                    sums_r[d] += m.rotation_deg[d];
                }
                n += 1;
            }
        }
    }
    let k = n.max(1) as f64;
    let mean_t = sums_t.map(|s| s / k);
    let mean_r = sums_r.map(|s| s / k);
    let pass = misses == 0 && mean_t.iter().all(|e| *e <= 5.0) && mean_r.iter().all(|e| *e <= 4.0);
    outcome(pass, format!("mean {mean_t:.3?} mm, {mean_r:.3?} deg over {n} matches, {misses} misses (rig reference 3.03/3.27/3.3 mm, 2.95/3.26 deg)"))
}

fn adjacent_boxes() -> Outcome {
    // same yaw, touching along the rotated x axis
    let yaw = 15.0f64;
    let (s, c) = yaw.to_radians().sin_cos();
    let scene = SceneSpec::with_boxes(vec![
        BoxSpec::resting([150.0, 200.0, 80.0], -75.0 * c + 20.0, -75.0 * s - 10.0, 0.0, yaw, 180),
        BoxSpec::resting([150.0, 200.0, 80.0], 75.0 * c + 20.0, 75.0 * s - 10.0, 0.0, yaw, 220),
    ]);
    let truth = ground_truth(&scene);
    let r = Rendered::new(&scene);
    let mut worst = [0.0f64; 3];
    let mut ok = true;
    let mut found = Vec::new();
    for seed in 0..5u64 {
        let cloud = r.noisy(0.002, seed);
        let (cp, pp) = r.both_phases(&cloud);
        let poses = combined(cp, pp);
        let t = verify_against_ground_truth(&poses, &truth, DEFAULT_MATCH_RADIUS_MM);
        found.push(poses.len());
        ok &= t.matches.len() == 2 && poses.len() == 2;
        for m in &t.matches {
            max3(&mut worst, m.translation_mm);
            ok &= m.translation_mm.iter().all(|e| *e <= 5.0) && m.rotation_deg.iter().all(|e| *e <= 4.0);
        }
    }
    outcome(ok, format!("poses per run {found:?}, worst centroid error {worst:.3?} mm"))
}

fn stacked_boxes() -> Outcome {
    let scene = SceneSpec::with_boxes(vec![
        BoxSpec::resting([300.0, 250.0, 100.0], 0.0, 0.0, 0.0, 10.0, 140),
        BoxSpec::resting([120.0, 90.0, 60.0], 20.0, -10.0, 100.0, 25.0, 220),
    ]);
    let truth = ground_truth(&scene);
    let r = Rendered::new(&scene);
    let (child, parent) = r.both_phases(&r.clean);
    let tc = verify_against_ground_truth(&child, &truth, DEFAULT_MATCH_RADIUS_MM);
    let tp = verify_against_ground_truth(&parent, &truth, DEFAULT_MATCH_RADIUS_MM);
    let child_ok = child.len() == 1 && tc.matches.len() == 1 && tc.matches[0].truth_id == 1;
    let parent_ok = parent.len() == 1 && tp.matches.len() == 1 && tp.matches[0].truth_id == 0;
    let closer = child_ok && parent_ok && child[0].centroid_mm[2] < parent[0].centroid_mm[2];
    outcome(
        child_ok && parent_ok && closer,
        format!(
            "child phase {} pose(s), parent phase {} pose(s), child z {:?} mm, parent z {:?} mm",
            child.len(),
            parent.len(),
            child.first().map(|p| p.centroid_mm[2].round()),
            parent.first().map(|p| p.centroid_mm[2].round())
        ),
    )
}

fn duplicates(poses: &[PoseRecord]) -> usize {
    let mut n = 0;
    for i in 0..poses.len() {
        for j in i + 1..poses.len() {
            let d: f64 = (0..3).map(|k| (poses[i].centroid_mm[k] - poses[j].centroid_mm[k]).powi(2)).sum::<f64>().sqrt();
            if d < DEFAULT_MATCH_RADIUS_MM {
                n += 1;
            }
        }
    }
    n
}

fn cluttered_bin() -> Outcome {
    let scene = cluttered_scene();
    let truth = ground_truth(&scene);
    let r = Rendered::new(&scene);
    let mut ok = true;
    let mut detected = Vec::new();
    let mut dups = 0;
    let mut extra = 0;
    for seed in 0..5u64 {
        let (c, p) = r.both_phases(&r.noisy(0.002, seed));
        let poses = combined(c, p);
        let t = verify_against_ground_truth(&poses, &truth, DEFAULT_MATCH_RADIUS_MM);
        detected.push(t.matches.len());
        dups += duplicates(&poses);
        extra += t.unmatched_poses;
        ok &= t.matches.len() >= 5 && duplicates(&poses) == 0;
    }
    outcome(ok, format!("detected per run {detected:?} of 6, {dups} duplicate pairs, {extra} unmatched poses"))
}

fn timing() -> Outcome {
    let scene = four_box_scene();
    let r = Rendered::new(&scene);
    let cloud = r.noisy(0.002, 7);
    let start = Instant::now();
    let report = run_pipeline(&r.config, &r.image, &cloud, Phase::ParentAfter).expect("pipeline runs");
    let wall = start.elapsed().as_secs_f64();
    let json = serde_json::to_value(report.timing_s).expect("timings serialize");
    let keys = ["mask_generation", "filtering", "resampling_don", "clustering", "plane_segmentation", "pose_estimation", "total"];
    let all_keys = keys.iter().all(|k| json.get(k).and_then(|v| v.as_f64()).is_some_and(|v| v >= 0.0));
    outcome(
        wall <= 2.0 && all_keys && report.poses.len() == 4,
        format!("{wall:.3} s wall, {} poses, timing keys present: {all_keys}", report.poses.len()),
    )
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
    (0..n).map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn brute_mst_weights(points: &[Point3], k: usize) -> Vec<f64> {
    let n = points.len();
    let core: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| (points[i] - points[j]).norm()).collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect();
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let w = (points[i] - points[j]).norm().max(core[i]).max(core[j]);
            edges.push((w, i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut weights = Vec::with_capacity(n - 1);
    for (w, a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            weights.push(w);
        }
    }
    weights
}

fn brute_knn(points: &[Point3], q: &Point3, k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = points.iter().enumerate().map(|(i, p)| (i, (p - q).norm_squared())).collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn oracle_equivalences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mst_ok = 0;
    for _ in 0..100 {
        let n = rng.random_range(10..=300);
        let pts = random_points(&mut rng, n);
        let k = rng.random_range(1..=5);
        let core = core_distances(&pts, k).expect("enough points");
        let tree = minimum_spanning_tree(&pts, &core);
        let genuine = tree.iter().all(|e| e.weight == mutual_reachability(&pts, &core, e.a, e.b));
        let mut ours: Vec<f64> = tree.iter().map(|e| e.weight).collect();
        ours.sort_by(f64::total_cmp);
        let oracle = brute_mst_weights(&pts, k);
        let sum_ours: f64 = ours.iter().sum();
        let sum_oracle: f64 = oracle.iter().sum();
        if genuine && ours == oracle && sum_ours == sum_oracle {
            mst_ok += 1;
        }
    }

    let mut ransac_ok = 0;
    let thresh = 0.002;
    for trial in 0..100u64 {
        let n = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.2..1.0)).normalize();
        let u = n.cross(&Vec3::x()).normalize();
        let v = n.cross(&u);
        let c = Point3::new(0.0, 0.0, 1.0);
        let mut pts: Vec<Point3> = (0..70)
            .map(|_| c + u * rng.random_range(-0.15..0.15) + v * rng.random_range(-0.15..0.15))
            .collect();
        pts.extend((0..30).map(|_| c + Vec3::new(rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15))));
        let (inliers, _) = ransac_plane(&pts, thresh, 200, trial).expect("ransac runs");
        let sub: Vec<usize> = rand::seq::index::sample(&mut rng, pts.len(), 20).into_vec();
        let mut best = 0;
        for a in 0..20 {
            for b in a + 1..20 {
                for d in b + 1..20 {
                    let (p, q, r) = (pts[sub[a]], pts[sub[b]], pts[sub[d]]);
                    let nrm = (q - p).cross(&(r - p));
                    if nrm.norm() < 1e-12 {
                        continue;
                    }
                    let nrm = nrm.normalize();
                    let count = pts.iter().filter(|x| (*x - p).dot(&nrm).abs() <= thresh).count();
                    best = best.max(count);
                }
            }
        }
        if inliers.len() >= best {
            ransac_ok += 1;
        }
    }

    let mut knn_ok = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..=200);
        let pts = random_points(&mut rng, n);
        let index = NeighborIndex::new(&pts);
        let all = (0..20).all(|_| {
            let q = random_points(&mut rng, 1)[0];
            let k = rng.random_range(1..=n.min(16));
            let ours: Vec<(usize, f64)> = index.knn(&q, k).iter().map(|nb| (nb.index, nb.distance_squared)).collect();
            ours == brute_knn(&pts, &q, k)
        });
        if all {
            knn_ok += 1;
        }
    }
    outcome(
        mst_ok == 100 && ransac_ok >= 95 && knn_ok == 100,
        format!("MST {mst_ok}/100 exact, RANSAC {ransac_ok}/100 at or above oracle, kNN {knn_ok}/100 exact"),
    )
}

fn random_rotation(rng: &mut ChaCha8Rng) -> nalgebra::Matrix3<f64> {
    let q = nalgebra::Quaternion::new(
        rng.sample::<f64, _>(rand_distr::StandardNormal),
        rng.sample(rand_distr::StandardNormal),
        rng.sample(rand_distr::StandardNormal),
        rng.sample(rand_distr::StandardNormal),
    );
    nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample(rand_distr::StandardNormal),
            rng.sample(rand_distr::StandardNormal),
            rng.sample(rand_distr::StandardNormal),
        );
        if v.norm() > 1e-6 {
            return v.normalize();
        }
    }
}

fn property_suites() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures: Vec<String> = Vec::new();

    let mut euler_err: f64 = 0.0;
    for _ in 0..1000 {
        let r = random_rotation(&mut rng);
        let e = euler_zyx_from_rotation(&r).expect("rotation");
        euler_err = euler_err.max((e.to_rotation() - r).abs().max());
    }
    for theta2 in [90.0, -90.0] {
        for _ in 0..50 {
            let r = EulerZYX::new(rng.random_range(-180.0..180.0), theta2, rng.random_range(-180.0..180.0)).to_rotation();
            let e = euler_zyx_from_rotation(&r).expect("rotation");
            euler_err = euler_err.max((e.to_rotation() - r).abs().max());
            if e.theta3 != 0.0 || e.theta2 != theta2 {
                failures.push(format!("gimbal branch {theta2}: {e:?}"));
            }
        }
    }
    if euler_err > 1e-9 {
        failures.push(format!("Euler roundtrip error {euler_err:e}"));
    }

    for _ in 0..100_000 {
        let d = difference_of_normals(&random_unit(&mut rng), &random_unit(&mut rng)).norm();
        if !(0.0..=1.0).contains(&d) {
            failures.push(format!("DoN norm {d}"));
            break;
        }
    }

    for _ in 0..10_000 {
        let raw = [0, 1, 2, 3].map(|_| rng.random_range(-10.0..10.0));
        let Ok(p) = normalize_plane(raw) else { continue };
        let q = normalize_plane(p.coefficients()).expect("normalized plane");
        let err = p.coefficients().iter().zip(q.coefficients()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if err > 1e-12 {
            failures.push(format!("normalize not idempotent by {err:e}"));
            break;
        }
    }

    for _ in 0..10_000 {
        let n = random_unit(&mut rng);
        let f = build_frame(&n, &Point3::new(0.1, 0.2, 1.0)).expect("unit normal");
        if !is_rotation(f.rotation(), 1e-9) || (f.rotation().column(2) - n).norm() > 1e-12 {
            failures.push("frame not orthonormal".into());
            break;
        }
    }

    for _ in 0..200 {
        let n = rng.random_range(1..400);
        let pts = random_points(&mut rng, n);
        let leaf = rng.random_range(0.05..0.5);
        let out = voxel_grid_downsample(&pts, leaf).expect("valid leaf");
        let sound = out.len() <= pts.len()
            && out.iter().all(|c| {
                pts.iter().any(|p| {
                    let key = |x: f64, y: f64| (x / leaf).floor() == (y / leaf).floor();
                    key(p.x, c.x) && key(p.y, c.y) && key(p.z, c.z)
                })
            });
        if !sound {
            failures.push("voxel centroid outside its voxel".into());
            break;
        }
        if n > 9 {
            let kept = statistical_outlier_removal(&pts, 8, 1.0).expect("enough points");
            if kept.len() > pts.len() || kept.iter().any(|k| !pts.contains(k)) {
                failures.push("SOR output not a subset".into());
                break;
            }
        }
    }

    let scene = cluttered_scene();
    let r = Rendered::new(&scene);
    let seg_c = segment(&r.config, &r.image, Phase::ChildFirst).expect("segments");
    let seg_p = segment(&r.config, &r.image, Phase::ParentAfter).expect("segments");
    let mut sources: Vec<usize> = seg_c.masks.iter().chain(&seg_p.masks).map(|m| m.source).collect();
    sources.sort_unstable();
    if sources != (0..seg_c.contours.len()).collect::<Vec<_>>() {
        failures.push(format!("phase masks cover contours {sources:?}"));
    }
    let masks = generate_masks(&seg_c.contours, seg_c.roi.width, seg_c.roi.height, Phase::ParentAfter).expect("masks");
    for (i, a) in seg_c.masks.iter().chain(&masks).enumerate() {
        for b in seg_c.masks.iter().chain(&masks).skip(i + 1) {
            if a.bits.bits().iter().zip(b.bits.bits()).any(|(x, y)| *x && *y) {
                failures.push(format!("masks of contours {} and {} overlap", a.source, b.source));
            }
        }
    }
    if seg_c.masks.iter().any(|m| m.role != MaskRole::Child) {
        failures.push("child phase emitted a parent mask".into());
    }

    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs <= 60.0;
    outcome(pass, format!("Euler max error {euler_err:.1e}, {secs:.2} s{}", if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 8] = [
        ("noiseless recovery, 9 orientations", noiseless_recovery),
        ("noisy accuracy, 9 orientations x 20 seeds", noisy_accuracy),
        ("adjacent boxes", adjacent_boxes),
        ("stacked boxes", stacked_boxes),
        ("cluttered bin", cluttered_bin),
        ("pipeline timing", timing),
        ("oracle equivalences", oracle_equivalences),
        ("numerical properties", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!("criterion {} [{}] {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
