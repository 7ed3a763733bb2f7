//! Brute-force references for the acceptance criteria, written against the
//! raw camera and projector parameters rather than the library's geometry.

use nalgebra::{Point2, Point3, Vector3};
use sapm_core::{Device, Occluder, Scene, TargetSurface};

/// Table plane `z = 0` centered at the origin with its half extents.
pub struct Ground {
    half: (f64, f64),
}

impl Ground {
    pub fn of(scene: &Scene) -> Ground {
        let TargetSurface::Plane(p) = &scene.target else {
            panic!("oracle handles the table plane only");
        };
        assert!(p.origin.coords.norm() == 0.0 && p.axis_u == Vector3::x() && p.axis_v == Vector3::y());
        Ground {
            half: (p.extent.0 / 2.0, p.extent.1 / 2.0),
        }
    }

    /// Where the ray through continuous pixel `px` of `dev` meets the table.
    pub fn cast(&self, dev: &dyn Device, px: Point2<f64>) -> Option<Point3<f64>> {
        let k = dev.intrinsics();
        let local = Vector3::new((px.x - k.cx) / k.fx, (k.cy - px.y) / k.fy, -1.0);
        let d = dev.pose().rotation() * local;
        let o = dev.pose().position();
        // the table faces +z, so only downward rays can hit its front
        if d.z >= 0.0 {
            return None;
        }
        let t = -o.z / d.z;
        let x = o + d * t;
        (t > 0.0 && x.x.abs() <= self.half.0 && x.y.abs() <= self.half.1).then_some(x)
    }
}

pub fn project(dev: &dyn Device, x: &Point3<f64>) -> Option<Point2<f64>> {
    let local = dev.pose().rotation().transpose() * (x - dev.pose().position());
    let depth = -local.z;
    let k = dev.intrinsics();
    (depth > 0.0).then(|| Point2::new(k.cx + k.fx * local.x / depth, k.cy - k.fy * local.y / depth))
}

fn point_segment(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Distance from segment `a b` to segment `p q`, by ternary search over the
/// first segment (the distance is convex along it).
fn segment_segment(a: &Point3<f64>, b: &Point3<f64>, p: &Point3<f64>, q: &Point3<f64>) -> f64 {
    let f = |t: f64| point_segment(&(a + (b - a) * t), p, q);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f((lo + hi) / 2.0)
}

/// True when the segment passes strictly inside any occluder.
pub fn blocked(occluders: &[Occluder], a: &Point3<f64>, b: &Point3<f64>) -> bool {
    occluders.iter().any(|o| match o {
        Occluder::Sphere { center, radius } => point_segment(center, a, b) < *radius,
        Occluder::Capsule { a: p, b: q, radius } => {
            let mid = nalgebra::center(p, q);
            let reach = (q - p).norm() / 2.0 + radius;
            point_segment(&mid, a, b) < reach && segment_segment(a, b, p, q) < *radius
        }
        Occluder::Mesh(_) => panic!("oracle handles spheres and capsules only"),
    })
}

fn signed_area(poly: &[Point2<f64>]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| poly[i].x * poly[(i + 1) % n].y - poly[(i + 1) % n].x * poly[i].y)
        .sum::<f64>()
        / 2.0
}

/// Area of the unit pixel square at `(x, y)` inside the convex quad,
/// clipping the square by each quad edge in turn.
fn overlap(quad: &[Point2<f64>; 4], x: f64, y: f64) -> f64 {
    let orient = signed_area(quad).signum();
    let mut poly = vec![
        Point2::new(x, y),
        Point2::new(x + 1.0, y),
        Point2::new(x + 1.0, y + 1.0),
        Point2::new(x, y + 1.0),
    ];
    for i in 0..4 {
        let (a, b) = (quad[i], quad[(i + 1) % 4]);
        let side = |p: &Point2<f64>| orient * ((b - a).x * (p - a).y - (b - a).y * (p - a).x);
        let mut next = Vec::with_capacity(poly.len() + 1);
        for j in 0..poly.len() {
            let (p, q) = (poly[j], poly[(j + 1) % poly.len()]);
            let (sp, sq) = (side(&p), side(&q));
            if sp >= 0.0 {
                next.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                next.push(p + (q - p) * (sp / (sp - sq)));
            }
        }
        poly = next;
        if poly.len() < 3 {
            return 0.0;
        }
    }
    signed_area(&poly).abs()
}

/// Per-pixel relative illuminance under full-white content, or why it is
/// undefined.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pixel {
    Value(f64),
    NoSurface,
    ViewBlocked,
    Unlit,
}

/// Enumerates every projector pixel, lands its corners and center on the
/// table, and accumulates falloff × overlap area × fraction of the five
/// rays that reach the projector.
pub fn illuminance(scene: &Scene) -> Vec<Pixel> {
    let ground = Ground::of(scene);
    let cam = &scene.camera;
    let (w, h) = cam.resolution;
    let mut free = vec![0.0; w * h];
    let mut lit = vec![0.0; w * h];
    for proj in &scene.projectors {
        let c = proj.pose.position();
        let (pw, ph) = proj.resolution;
        for j in 0..ph {
            for i in 0..pw {
                let mut corners = [Point3::origin(); 4];
                let mut quad = [Point2::origin(); 4];
                let mut ok = true;
                for (k, (dx, dy)) in [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)].into_iter().enumerate() {
                    match ground.cast(proj, Point2::new(i as f64 + dx, j as f64 + dy)) {
                        // the corner must face the camera as well
                        Some(x) if cam.pose.position().z > x.z => match project(cam, &x) {
                            Some(px) => {
                                corners[k] = x;
                                quad[k] = px;
                            }
                            None => ok = false,
                        },
                        _ => ok = false,
                    }
                }
                if !ok {
                    continue;
                }
                let Some(mid) = ground.cast(proj, Point2::new(i as f64 + 0.5, j as f64 + 0.5)) else {
                    continue;
                };
                // the projector shows content only where its pixel center
                // lands inside the camera frame
                match project(cam, &mid) {
                    Some(at) if at.x >= 0.0 && at.y >= 0.0 && at.x <= w as f64 && at.y <= h as f64 => {}
                    _ => continue,
                }
                let v = c - mid;
                let falloff = v.z / v.norm().powi(3);
                let open = std::iter::once(mid)
                    .chain(corners)
                    .filter(|x| !blocked(&scene.occluders, x, &c))
                    .count() as f64
                    / 5.0;
                let x0 = quad.iter().map(|p| p.x).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
                let x1 = (quad.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max).ceil().max(0.0) as usize).min(w);
                let y0 = quad.iter().map(|p| p.y).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
                let y1 = (quad.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max).ceil().max(0.0) as usize).min(h);
                for y in y0..y1 {
                    for x in x0..x1 {
                        let a = overlap(&quad, x as f64, y as f64);
                        free[y * w + x] += falloff * a;
                        lit[y * w + x] += falloff * a * open;
                    }
                }
            }
        }
    }
    (0..w * h)
        .map(|q| {
            let px = Point2::new((q % w) as f64 + 0.5, (q / w) as f64 + 0.5);
            let Some(x) = ground.cast(cam, px) else {
                return Pixel::NoSurface;
            };
            if blocked(&scene.occluders, &cam.pose.position(), &x) {
                return Pixel::ViewBlocked;
            }
            if free[q] <= 0.0 {
                return Pixel::Unlit;
            }
            Pixel::Value((lit[q] / free[q]).clamp(0.0, 1.0))
        })
        .collect()
}

/// Per camera pixel, the projectors whose center sees the table point
/// under the pixel center; `None` where the camera misses the table.
pub fn visible_projectors(scene: &Scene) -> Vec<Option<Vec<u32>>> {
    let ground = Ground::of(scene);
    let cam = &scene.camera;
    let (w, h) = cam.resolution;
    (0..w * h)
        .map(|q| {
            let x = ground.cast(cam, Point2::new((q % w) as f64 + 0.5, (q / w) as f64 + 0.5))?;
            Some(
                scene
                    .projectors
                    .iter()
                    .filter(|p| {
                        let c = p.pose.position();
                        let (pw, ph) = p.resolution;
                        c.z > 0.0
                            && project(*p, &x)
                                .is_some_and(|u| u.x >= 0.0 && u.y >= 0.0 && u.x < pw as f64 && u.y < ph as f64)
                            && !blocked(&scene.occluders, &x, &c)
                    })
                    .map(|p| p.id)
                    .collect(),
            )
        })
        .collect()
}
