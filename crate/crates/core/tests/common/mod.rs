//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Matrix3, Point2, Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sapm_core::scene::{make_grid_array, Device};
use sapm_core::{CameraModel, FocalSpec, Occluder, PlaneTarget, ProjectorTemplate, Scene, TargetSurface};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn table() -> TargetSurface {
    TargetSurface::Plane(PlaneTarget::new(Point3::origin(), Vector3::x(), Vector3::y(), (1.2, 0.6)).unwrap())
}

/// Camera straight above the table center.
pub fn overhead_camera(height: f64, res: (usize, usize), field: f64) -> CameraModel {
    CameraModel::look_at(Point3::new(0.0, 0.0, height), Point3::origin(), Vector3::y(), res, FocalSpec::FieldWidth(field))
        .unwrap()
}

pub fn array_scene(n: usize, proj_res: (usize, usize), proj_field: f64, camera: CameraModel, occ: Vec<Occluder>) -> Scene {
    let t = table();
    let tpl = ProjectorTemplate {
        resolution: proj_res,
        focal: FocalSpec::FieldWidth(proj_field),
        ..Default::default()
    };
    let projectors = make_grid_array(n, n, 0.3, 1.4, &t, &tpl).unwrap();
    Scene::new(projectors, t, camera, occ).unwrap()
}

/// Pinhole projection written out from the pose matrix: device looks down
/// its local −z with +y up, image v grows downward.
pub fn pinhole(device: &dyn Device, x: &Point3<f64>) -> Option<Point2<f64>> {
    let r: Matrix3<f64> = *device.pose().rotation();
    let local = r.transpose() * (x - device.pose().position());
    let depth = -local.z;
    if depth <= 0.0 {
        return None;
    }
    let k = device.intrinsics();
    Some(Point2::new(k.cx + k.fx * local.x / depth, k.cy - k.fy * local.y / depth))
}

/// World point on the plane `z = 0` seen through continuous pixel `px`.
pub fn cast_to_ground(device: &dyn Device, px: Point2<f64>) -> Option<Point3<f64>> {
    let k = device.intrinsics();
    let local = Vector3::new((px.x - k.cx) / k.fx, -(px.y - k.cy) / k.fy, -1.0);
    let d = device.pose().rotation() * local;
    let o = device.pose().position();
    if d.z.abs() < 1e-15 {
        return None;
    }
    let t = -o.z / d.z;
    (t > 0.0).then(|| o + d * t)
}

pub fn point_segment_dist(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Minimum distance from segment `a b` to a convex distance field, by
/// ternary search over the segment parameter.
pub fn segment_min(a: &Point3<f64>, b: &Point3<f64>, f: impl Fn(&Point3<f64>) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(&(a + (b - a) * m1)) < f(&(a + (b - a) * m2)) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f(&(a + (b - a) * ((lo + hi) / 2.0)))
}

/// Clearance between the segment and the occluder surface (negative when
/// the segment passes inside).
pub fn clearance(o: &Occluder, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    match o {
        Occluder::Sphere { center, radius } => point_segment_dist(center, a, b) - radius,
        Occluder::Capsule { a: p, b: q, radius } => segment_min(a, b, |x| point_segment_dist(x, p, q)) - radius,
        Occluder::Mesh(_) => unimplemented!("mesh clearance"),
    }
}

pub fn oracle_blocks(occluders: &[Occluder], a: &Point3<f64>, b: &Point3<f64>) -> bool {
    occluders.iter().any(|o| clearance(o, a, b) < 0.0)
}
