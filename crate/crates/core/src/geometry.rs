//! Ray and polygon primitives shared by the scene, transport and occlusion code.

use nalgebra::{Point2, Point3, Vector3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Point3<f64>,
    /// Unit direction.
    pub dir: Vector3<f64>,
}

impl Ray {
    pub fn new(origin: Point3<f64>, dir: Vector3<f64>) -> Self {
        Self {
            origin,
            dir: dir.normalize(),
        }
    }

    pub fn at(&self, t: f64) -> Point3<f64> {
        self.origin + self.dir * t
    }
}

/// Möller–Trumbore. Returns `(t, u, v)` with barycentric `u, v` for hits at
/// `t > t_min`.
pub fn ray_triangle(
    ray: &Ray,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
    t_min: f64,
) -> Option<(f64, f64, f64)> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = ray.dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-15 {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = ray.origin - a;
    let u = tvec.dot(&pvec) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = ray.dir.dot(&qvec) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&qvec) * inv;
    (t > t_min).then_some((t, u, v))
}

/// Whether the open segment `a → b` passes through the interior of the sphere.
pub fn segment_hits_sphere(a: &Point3<f64>, b: &Point3<f64>, center: &Point3<f64>, radius: f64) -> bool {
    let d = b - a;
    let m = a - center;
    let qa = d.dot(&d);
    if qa == 0.0 {
        return m.norm_squared() < radius * radius;
    }
    let qb = m.dot(&d);
    let qc = m.dot(&m) - radius * radius;
    let disc = qb * qb - qa * qc;
    if disc <= 0.0 {
        return false;
    }
    let s = disc.sqrt();
    let t0 = (-qb - s) / qa;
    let t1 = (-qb + s) / qa;
    // chord (t0, t1) overlaps (0, 1)
    t0 < 1.0 && t1 > 0.0
}

/// Squared distance between segments `p1 q1` and `p2 q2` (closest-point
/// clamping on both parameters).
pub fn segment_segment_dist2(
    p1: &Point3<f64>,
    q1: &Point3<f64>,
    p2: &Point3<f64>,
    q2: &Point3<f64>,
) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let eps = 1e-300;
    let (s, t);
    if a <= eps && e <= eps {
        return r.norm_squared();
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (c1 - c2).norm_squared()
}

/// A camera-space quadrilateral with corners in traversal order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quad {
    pub corners: [Point2<f64>; 4],
}

impl Quad {
    pub fn signed_area(&self) -> f64 {
        polygon_signed_area(&self.corners)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Strictly convex with non-zero area.
    pub fn is_convex(&self) -> bool {
        let mut sign = 0.0;
        for i in 0..4 {
            let a = self.corners[i];
            let b = self.corners[(i + 1) % 4];
            let c = self.corners[(i + 2) % 4];
            let cross = (b - a).perp(&(c - b));
            if cross == 0.0 {
                return false;
            }
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
        true
    }

    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in &self.corners {
            b.0 = b.0.min(c.x);
            b.1 = b.1.min(c.y);
            b.2 = b.2.max(c.x);
            b.3 = b.3.max(c.y);
        }
        b
    }
}

pub fn polygon_signed_area(poly: &[Point2<f64>]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s
}

/// Area of `poly` inside the axis-aligned box `[x0, x1] × [y0, y1]`
/// (Sutherland–Hodgman against the four box edges).
pub fn clipped_area(poly: &[Point2<f64>], x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let mut cur: Vec<Point2<f64>> = poly.to_vec();
    let mut next = Vec::with_capacity(8);
    // (axis, bound, keep_greater)
    let planes = [(0usize, x0, true), (0, x1, false), (1, y0, true), (1, y1, false)];
    for &(axis, bound, keep_ge) in &planes {
        if cur.is_empty() {
            return 0.0;
        }
        next.clear();
        let inside = |p: &Point2<f64>| {
            if keep_ge {
                p[axis] >= bound
            } else {
                p[axis] <= bound
            }
        };
        let n = cur.len();
        for i in 0..n {
            let a = cur[i];
            let b = cur[(i + 1) % n];
            let ina = inside(&a);
            let inb = inside(&b);
            if ina {
                next.push(a);
            }
            if ina != inb {
                let t = (bound - a[axis]) / (b[axis] - a[axis]);
                next.push(a + (b - a) * t);
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    polygon_signed_area(&cur).abs()
}
