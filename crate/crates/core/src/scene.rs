//! Devices, target surfaces, occluders and the scene that ties them together.

use nalgebra::{Matrix3, Point2, Point3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{ray_triangle, segment_hits_sphere, segment_segment_dist2, Quad, Ray};

/// Pinhole intrinsics in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self { fx, fy, cx, cy }
    }

    /// Principal point at the image center.
    pub fn centered(fx: f64, fy: f64, resolution: (usize, usize)) -> Self {
        Self::new(fx, fy, resolution.0 as f64 / 2.0, resolution.1 as f64 / 2.0)
    }
}

/// Rigid device pose. The rotation's columns are the device axes expressed in
/// world coordinates; the device looks along its local −z with +y up, and
/// image rows grow downwards.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    position: Point3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, position: Point3<f64>) -> Result<Self> {
        let err = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if !(err < 1e-9) || rotation.determinant() < 0.0 {
            return Err(Error::InvalidScene(format!(
                "pose rotation is not a proper orthonormal matrix (|RᵀR − I| = {err:e})"
            )));
        }
        Ok(Self { rotation, position })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            position: Point3::origin(),
        }
    }

    /// Pose at `eye` whose optical axis points at `target`.
    pub fn look_at(eye: Point3<f64>, target: Point3<f64>, up: Vector3<f64>) -> Result<Self> {
        let fwd = target - eye;
        if fwd.norm() < 1e-12 {
            return Err(Error::InvalidScene("look-at target coincides with eye".into()));
        }
        let z = -fwd.normalize();
        let x = up.cross(&z);
        if x.norm() < 1e-12 {
            return Err(Error::InvalidScene("up vector is parallel to the view direction".into()));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        Ok(Self {
            rotation: Matrix3::from_columns(&[x, y, z]),
            position: eye,
        })
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn position(&self) -> Point3<f64> {
        self.position
    }

    /// Unit optical axis in world coordinates.
    pub fn forward(&self) -> Vector3<f64> {
        -self.rotation.column(2).into_owned()
    }

    pub fn to_device(&self, world: &Point3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (world - self.position)
    }
}

/// Common pinhole geometry of cameras and projectors.
pub trait Device {
    fn pose(&self) -> &Pose;
    fn intrinsics(&self) -> &Intrinsics;
    fn resolution(&self) -> (usize, usize);

    fn center(&self) -> Point3<f64> {
        self.pose().position()
    }

    /// Ray from the optical center through continuous pixel coordinates.
    fn pixel_ray(&self, pixel: Point2<f64>) -> Ray {
        let k = self.intrinsics();
        let local = Vector3::new((pixel.x - k.cx) / k.fx, -(pixel.y - k.cy) / k.fy, -1.0);
        Ray::new(self.center(), self.pose().rotation() * local)
    }

    fn in_image(&self, pixel: &Point2<f64>) -> bool {
        let (w, h) = self.resolution();
        pixel.x >= 0.0 && pixel.y >= 0.0 && pixel.x < w as f64 && pixel.y < h as f64
    }

    /// 3×4 matrix mapping homogeneous world points to homogeneous pixels.
    fn projection_matrix(&self) -> nalgebra::Matrix3x4<f64> {
        let k = self.intrinsics();
        let kk = Matrix3::new(k.fx, 0.0, -k.cx, 0.0, -k.fy, -k.cy, 0.0, 0.0, -1.0);
        let rt = self.pose().rotation().transpose();
        let t = -(rt * self.center().coords);
        let mut ext = nalgebra::Matrix3x4::zeros();
        ext.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        ext.set_column(3, &t);
        kk * ext
    }
}

fn validate_device(d: &dyn Device, what: &str) -> Result<()> {
    let k = d.intrinsics();
    if !(k.fx > 0.0 && k.fy > 0.0) {
        return Err(Error::InvalidScene(format!("{what}: focal lengths must be positive")));
    }
    let (w, h) = d.resolution();
    if w < 2 || h < 2 {
        return Err(Error::InvalidScene(format!("{what}: resolution must be at least 2x2")));
    }
    Pose::new(*d.pose().rotation(), d.pose().position()).map(|_| ())
}

/// Forward pinhole projection to continuous pixel coordinates (unclamped).
pub fn project_point(device: &dyn Device, world: &Point3<f64>) -> Result<Point2<f64>> {
    let p = device.pose().to_device(world);
    let depth = -p.z;
    if !(depth > 0.0) {
        return Err(Error::BehindCamera { depth });
    }
    let k = device.intrinsics();
    Ok(Point2::new(k.cx + k.fx * p.x / depth, k.cy - k.fy * p.y / depth))
}

/// World point at `depth` along the optical axis direction through `pixel`.
pub fn back_project(device: &dyn Device, pixel: &Point2<f64>, depth: f64) -> Point3<f64> {
    let k = device.intrinsics();
    let local = Vector3::new(
        (pixel.x - k.cx) / k.fx * depth,
        -(pixel.y - k.cy) / k.fy * depth,
        -depth,
    );
    device.center() + device.pose().rotation() * local
}

#[derive(Clone, Debug, PartialEq)]
pub struct CameraModel {
    pub pose: Pose,
    pub intrinsics: Intrinsics,
    pub resolution: (usize, usize),
}

impl Device for CameraModel {
    fn pose(&self) -> &Pose {
        &self.pose
    }
    fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }
    fn resolution(&self) -> (usize, usize) {
        self.resolution
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorModel {
    pub id: u32,
    pub pose: Pose,
    pub intrinsics: Intrinsics,
    pub resolution: (usize, usize),
    /// Dynamic-range ceiling in normalized radiance, `(0, 1]`.
    pub max_output: f64,
    pub response_gamma: f64,
}

impl Device for ProjectorModel {
    fn pose(&self) -> &Pose {
        &self.pose
    }
    fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }
    fn resolution(&self) -> (usize, usize) {
        self.resolution
    }
}

impl ProjectorModel {
    pub fn validate(&self) -> Result<()> {
        validate_device(self, &format!("projector {}", self.id))?;
        if !(self.max_output > 0.0 && self.max_output <= 1.0) {
            return Err(Error::InvalidScene(format!(
                "projector {}: max_output must lie in (0, 1]",
                self.id
            )));
        }
        if !(self.response_gamma > 0.0) {
            return Err(Error::InvalidScene(format!(
                "projector {}: response gamma must be positive",
                self.id
            )));
        }
        Ok(())
    }
}

/// How focal lengths are derived when devices are placed automatically.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FocalSpec {
    Pixels { fx: f64, fy: f64 },
    /// Horizontal field covered at the distance of the aim point, in meters.
    FieldWidth(f64),
}

impl FocalSpec {
    /// `(fx, fy)` in pixels for an image `width_px` wide aimed `distance` meters away.
    pub fn focal(&self, width_px: usize, distance: f64) -> (f64, f64) {
        match *self {
            FocalSpec::Pixels { fx, fy } => (fx, fy),
            FocalSpec::FieldWidth(m) => {
                let f = width_px as f64 * distance / m;
                (f, f)
            }
        }
    }
}

impl CameraModel {
    pub fn look_at(
        eye: Point3<f64>,
        target: Point3<f64>,
        up: Vector3<f64>,
        resolution: (usize, usize),
        focal: FocalSpec,
    ) -> Result<Self> {
        let pose = Pose::look_at(eye, target, up)?;
        let (fx, fy) = focal.focal(resolution.0, (target - eye).norm());
        let cam = Self {
            pose,
            intrinsics: Intrinsics::centered(fx, fy, resolution),
            resolution,
        };
        validate_device(&cam, "camera")?;
        Ok(cam)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceHit {
    pub t: f64,
    pub point: Point3<f64>,
    /// Unit outward normal.
    pub normal: Vector3<f64>,
}

/// Bounded rectangle centered at `origin`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneTarget {
    pub origin: Point3<f64>,
    pub axis_u: Vector3<f64>,
    pub axis_v: Vector3<f64>,
    /// Full size along `axis_u` and `axis_v`, meters.
    pub extent: (f64, f64),
}

impl PlaneTarget {
    pub fn new(origin: Point3<f64>, axis_u: Vector3<f64>, axis_v: Vector3<f64>, extent: (f64, f64)) -> Result<Self> {
        if axis_u.norm() < 1e-12 || axis_v.norm() < 1e-12 {
            return Err(Error::InvalidScene("plane axes must be non-zero".into()));
        }
        let axis_u = axis_u.normalize();
        let axis_v = axis_v.normalize();
        if axis_u.dot(&axis_v).abs() > 1e-9 {
            return Err(Error::InvalidScene("plane axes must be orthogonal".into()));
        }
        if !(extent.0 > 0.0 && extent.1 > 0.0) {
            return Err(Error::InvalidScene("plane extents must be positive".into()));
        }
        Ok(Self {
            origin,
            axis_u,
            axis_v,
            extent,
        })
    }

    /// Front-face normal, `axis_u × axis_v`.
    pub fn normal(&self) -> Vector3<f64> {
        self.axis_u.cross(&self.axis_v)
    }

    pub fn intersect(&self, ray: &Ray) -> Option<SurfaceHit> {
        let n = self.normal();
        let denom = n.dot(&ray.dir);
        if denom.abs() < 1e-15 {
            return None;
        }
        let t = n.dot(&(self.origin - ray.origin)) / denom;
        if !(t > 1e-12) {
            return None;
        }
        let p = ray.at(t);
        let d = p - self.origin;
        if d.dot(&self.axis_u).abs() > self.extent.0 / 2.0 || d.dot(&self.axis_v).abs() > self.extent.1 / 2.0 {
            return None;
        }
        Some(SurfaceHit { t, point: p, normal: n })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    /// Per-vertex unit normals.
    normals: Vec<Vector3<f64>>,
    bounds: (Point3<f64>, Point3<f64>),
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>, normals: Vec<Vector3<f64>>) -> Result<Self> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::InvalidScene("mesh needs vertices and triangles".into()));
        }
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= vertices.len())) {
            return Err(Error::InvalidScene(format!("triangle {t:?} references a missing vertex")));
        }
        if normals.len() != vertices.len() {
            return Err(Error::InvalidScene("mesh needs one normal per vertex".into()));
        }
        if normals.iter().any(|n| (n.norm() - 1.0).abs() > 1e-6) {
            return Err(Error::InvalidScene("mesh normals must be unit length".into()));
        }
        let mut lo = vertices[0];
        let mut hi = vertices[0];
        for v in &vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Ok(Self {
            vertices,
            triangles,
            normals,
            bounds: (lo, hi),
        })
    }

    /// Area-weighted vertex normals from counter-clockwise faces.
    pub fn with_computed_normals(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut normals = vec![Vector3::zeros(); vertices.len()];
        for t in &triangles {
            if t.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::InvalidScene(format!("triangle {t:?} references a missing vertex")));
            }
            let n = (vertices[t[1]] - vertices[t[0]]).cross(&(vertices[t[2]] - vertices[t[0]]));
            for &i in t {
                normals[i] += n;
            }
        }
        for n in &mut normals {
            *n = if n.norm() > 0.0 { n.normalize() } else { Vector3::z() };
        }
        Self::new(vertices, triangles, normals)
    }

    /// Latitude/longitude sphere, counter-clockwise seen from outside.
    pub fn uv_sphere(center: Point3<f64>, radius: f64, stacks: usize, slices: usize) -> Result<Self> {
        let stacks = stacks.max(2);
        let slices = slices.max(3);
        let mut vertices = vec![center + Vector3::z() * radius];
        for i in 1..stacks {
            let th = std::f64::consts::PI * i as f64 / stacks as f64;
            for j in 0..slices {
                let ph = 2.0 * std::f64::consts::PI * j as f64 / slices as f64;
                vertices.push(center + Vector3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()) * radius);
            }
        }
        vertices.push(center - Vector3::z() * radius);
        let bottom = vertices.len() - 1;
        let ring = |i: usize, j: usize| 1 + (i - 1) * slices + (j % slices);
        let mut tris = Vec::new();
        for j in 0..slices {
            tris.push([0, ring(1, j), ring(1, j + 1)]);
            tris.push([bottom, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
        }
        for i in 1..stacks - 1 {
            for j in 0..slices {
                tris.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
                tris.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
            }
        }
        let normals = vertices.iter().map(|v| (v - center).normalize()).collect();
        Self::new(vertices, tris, normals)
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        self.bounds
    }

    fn ray_hits_bounds(&self, ray: &Ray, t_max: f64) -> bool {
        let (lo, hi) = self.bounds;
        let mut t0: f64 = 0.0;
        let mut t1 = t_max;
        for k in 0..3 {
            let inv = 1.0 / ray.dir[k];
            let mut a = (lo[k] - ray.origin[k]) * inv;
            let mut b = (hi[k] - ray.origin[k]) * inv;
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            // NaN from 0 * inf leaves the slab unconstrained
            if a.is_finite() || a == f64::INFINITY {
                t0 = t0.max(a - 1e-9);
            }
            if b.is_finite() || b == f64::NEG_INFINITY {
                t1 = t1.min(b + 1e-9);
            }
            if t0 > t1 {
                return false;
            }
        }
        true
    }

    /// Nearest hit beyond `t_min`, with the interpolated vertex normal.
    pub fn intersect(&self, ray: &Ray, t_min: f64) -> Option<SurfaceHit> {
        if !self.ray_hits_bounds(ray, f64::INFINITY) {
            return None;
        }
        let mut best: Option<(f64, usize, f64, f64)> = None;
        for (k, t) in self.triangles.iter().enumerate() {
            if let Some((th, u, v)) = ray_triangle(ray, &self.vertices[t[0]], &self.vertices[t[1]], &self.vertices[t[2]], t_min) {
                if best.is_none_or(|b| th < b.0) {
                    best = Some((th, k, u, v));
                }
            }
        }
        best.map(|(t, k, u, v)| {
            let tri = self.triangles[k];
            let n = self.normals[tri[0]] * (1.0 - u - v) + self.normals[tri[1]] * u + self.normals[tri[2]] * v;
            let n = if n.norm() > 1e-12 {
                n.normalize()
            } else {
                let a = self.vertices[tri[0]];
                (self.vertices[tri[1]] - a).cross(&(self.vertices[tri[2]] - a)).normalize()
            };
            SurfaceHit { t, point: ray.at(t), normal: n }
        })
    }

    /// Whether any triangle crosses the segment strictly between its ends
    /// (`eps` meters of slack at both ends).
    pub fn blocks_segment(&self, a: &Point3<f64>, b: &Point3<f64>, eps: f64) -> bool {
        let len = (b - a).norm();
        if len <= 2.0 * eps {
            return false;
        }
        let ray = Ray::new(*a, b - a);
        if !self.ray_hits_bounds(&ray, len) {
            return false;
        }
        self.triangles.iter().any(|t| {
            ray_triangle(&ray, &self.vertices[t[0]], &self.vertices[t[1]], &self.vertices[t[2]], eps)
                .is_some_and(|(th, _, _)| th < len - eps)
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TargetSurface {
    Plane(PlaneTarget),
    Mesh(TriangleMesh),
}

impl TargetSurface {
    /// Nearest front- or back-facing hit.
    pub fn intersect(&self, ray: &Ray) -> Option<SurfaceHit> {
        match self {
            TargetSurface::Plane(p) => p.intersect(ray),
            TargetSurface::Mesh(m) => m.intersect(ray, 1e-9),
        }
    }

    /// Aim point and local frame `(center, u, v, up)` used for array placement.
    pub fn frame(&self) -> (Point3<f64>, Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        match self {
            TargetSurface::Plane(p) => (p.origin, p.axis_u, p.axis_v, p.normal()),
            TargetSurface::Mesh(m) => {
                let (lo, hi) = m.bounds();
                (nalgebra::center(&lo, &hi), Vector3::x(), Vector3::y(), Vector3::z())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Occluder {
    Sphere { center: Point3<f64>, radius: f64 },
    Capsule { a: Point3<f64>, b: Point3<f64>, radius: f64 },
    Mesh(TriangleMesh),
}

impl Occluder {
    pub fn validate(&self) -> Result<()> {
        match self {
            Occluder::Sphere { radius, .. } if !(*radius > 0.0) => {
                Err(Error::InvalidScene("sphere radius must be positive".into()))
            }
            Occluder::Capsule { radius, .. } if !(*radius > 0.0) => {
                Err(Error::InvalidScene("capsule radius must be positive".into()))
            }
            Occluder::Capsule { a, b, .. } if (a - b).norm() < 1e-12 => {
                Err(Error::InvalidScene("capsule endpoints must be distinct".into()))
            }
            _ => Ok(()),
        }
    }

    /// Whether the open segment `a → b` passes through the occluder.
    pub fn blocks_segment(&self, a: &Point3<f64>, b: &Point3<f64>) -> bool {
        match self {
            Occluder::Sphere { center, radius } => segment_hits_sphere(a, b, center, *radius),
            Occluder::Capsule { a: p, b: q, radius } => segment_segment_dist2(a, b, p, q) < radius * radius,
            Occluder::Mesh(m) => m.blocks_segment(a, b, 1e-9),
        }
    }
}

/// Irradiance falloff model for transport weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Radiometry {
    /// `cos(incidence) / distance²`, relative to the reference projector's
    /// on-axis value.
    #[default]
    InverseSquareCosine,
    /// Every projector pixel delivers unit irradiance.
    Uniform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub projectors: Vec<ProjectorModel>,
    pub target: TargetSurface,
    pub camera: CameraModel,
    pub occluders: Vec<Occluder>,
    pub radiometry: Radiometry,
}

impl Scene {
    pub fn new(
        projectors: Vec<ProjectorModel>,
        target: TargetSurface,
        camera: CameraModel,
        occluders: Vec<Occluder>,
    ) -> Result<Self> {
        let scene = Self {
            projectors,
            target,
            camera,
            occluders,
            radiometry: Radiometry::default(),
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn with_radiometry(mut self, radiometry: Radiometry) -> Self {
        self.radiometry = radiometry;
        self
    }

    pub fn with_occluders(&self, occluders: Vec<Occluder>) -> Result<Self> {
        let mut s = self.clone();
        s.occluders = occluders;
        s.validate()?;
        Ok(s)
    }

    pub fn without_occluders(&self) -> Self {
        let mut s = self.clone();
        s.occluders.clear();
        s
    }

    /// Scene restricted to the given projector ids (in the given order).
    pub fn subset(&self, ids: &[u32]) -> Result<Self> {
        let projectors = ids
            .iter()
            .map(|id| {
                self.projector(*id)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("no projector with id {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut s = self.clone();
        s.projectors = projectors;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.projectors.is_empty() {
            return Err(Error::InvalidScene("scene needs at least one projector".into()));
        }
        let mut ids: Vec<u32> = self.projectors.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidScene("projector ids must be unique".into()));
        }
        for p in &self.projectors {
            p.validate()?;
        }
        validate_device(&self.camera, "camera")?;
        for o in &self.occluders {
            o.validate()?;
        }
        if let TargetSurface::Plane(plane) = &self.target {
            let n = plane.normal();
            let side = |c: Point3<f64>| n.dot(&(c - plane.origin));
            if !(side(self.camera.center()) > 0.0) || self.projectors.iter().any(|p| !(side(p.center()) > 0.0)) {
                return Err(Error::InvalidScene(
                    "camera and projectors must lie on the front side (axis_u × axis_v) of the target plane".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn projector(&self, id: u32) -> Option<&ProjectorModel> {
        self.projectors.iter().find(|p| p.id == id)
    }

    pub fn projector_ids(&self) -> Vec<u32> {
        self.projectors.iter().map(|p| p.id).collect()
    }

    /// Common box ceiling when all projectors display one image.
    pub fn min_max_output(&self) -> f64 {
        self.projectors.iter().map(|p| p.max_output).fold(f64::INFINITY, f64::min)
    }

    /// Projector nearest the centroid of the array (lowest id on ties).
    pub fn reference_projector(&self) -> &ProjectorModel {
        let n = self.projectors.len() as f64;
        let centroid = self
            .projectors
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.center().coords)
            / n;
        let mut best = &self.projectors[0];
        let mut best_d = f64::INFINITY;
        let mut sorted: Vec<&ProjectorModel> = self.projectors.iter().collect();
        sorted.sort_by_key(|p| p.id);
        for p in sorted {
            let d = (p.center().coords - centroid).norm();
            if d < best_d - 1e-12 {
                best = p;
                best_d = d;
            }
        }
        best
    }

    /// Irradiance factor `cos θ / d²` for light leaving `from` and landing on `hit`.
    pub fn falloff(from: &Point3<f64>, hit: &SurfaceHit) -> f64 {
        let v = from - hit.point;
        let d2 = v.norm_squared();
        (hit.normal.dot(&v) / d2.sqrt()).max(0.0) / d2
    }

    /// On-axis falloff of the reference projector; normalizes transport weights.
    pub fn reference_falloff(&self) -> f64 {
        if self.radiometry == Radiometry::Uniform {
            return 1.0;
        }
        let r = self.reference_projector();
        let k = r.intrinsics;
        let hit = self.target.intersect(&r.pixel_ray(Point2::new(k.cx, k.cy))).or_else(|| {
            let (c, ..) = self.target.frame();
            self.target.intersect(&Ray::new(r.center(), c - r.center()))
        });
        match hit {
            Some(h) if Self::falloff(&r.center(), &h) > 0.0 => Self::falloff(&r.center(), &h),
            _ => 1.0,
        }
    }

    /// Surface point seen through the center of camera pixel `(x, y)`, if the
    /// camera faces it.
    pub fn camera_surface_point(&self, x: usize, y: usize) -> Option<SurfaceHit> {
        let ray = self.camera.pixel_ray(Point2::new(x as f64 + 0.5, y as f64 + 0.5));
        self.target.intersect(&ray).filter(|h| h.normal.dot(&ray.dir) < 0.0)
    }

    /// Area in m² of the surface patch under camera pixel `(x, y)`.
    pub fn camera_pixel_area(&self, x: usize, y: usize) -> Option<f64> {
        let mut c = [Point3::origin(); 4];
        for (k, (dx, dy)) in [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)].into_iter().enumerate() {
            let ray = self.camera.pixel_ray(Point2::new(x as f64 + dx, y as f64 + dy));
            c[k] = self.target.intersect(&ray)?.point;
        }
        Some(0.5 * (c[2] - c[0]).cross(&(c[3] - c[1])).norm())
    }

    /// Whether the camera sees `point` unobstructed by the target itself
    /// (meshes only) and by occluders.
    pub fn camera_sees(&self, point: &Point3<f64>, check_occluders: bool) -> bool {
        let c = self.camera.center();
        if let TargetSurface::Mesh(m) = &self.target {
            if m.blocks_segment(&c, point, 1e-6) {
                return false;
            }
        }
        !(check_occluders && self.occluders.iter().any(|o| o.blocks_segment(&c, point)))
    }
}

/// Orientation of projectors in a grid array.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ArrayOrientation {
    /// Each principal ray passes through the target center.
    #[default]
    Converging,
    /// All optical axes along the target normal; lens shift centers the target.
    Parallel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectorTemplate {
    pub resolution: (usize, usize),
    pub focal: FocalSpec,
    pub max_output: f64,
    pub response_gamma: f64,
    pub orientation: ArrayOrientation,
}

impl Default for ProjectorTemplate {
    fn default() -> Self {
        Self {
            resolution: (128, 128),
            focal: FocalSpec::FieldWidth(0.4),
            max_output: 1.0,
            response_gamma: 2.2,
            orientation: ArrayOrientation::Converging,
        }
    }
}

/// Regular `rows × cols` ceiling array at `height` above the target center,
/// ids row-major. Row index grows along −v and column index along +u.
pub fn make_grid_array(
    rows: usize,
    cols: usize,
    spacing: f64,
    height: f64,
    target: &TargetSurface,
    template: &ProjectorTemplate,
) -> Result<Vec<ProjectorModel>> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("array needs at least one row and column".into()));
    }
    if !(spacing > 0.0) || !(height > 0.0) {
        return Err(Error::InvalidArgument("array spacing and height must be positive".into()));
    }
    let (center, u, v, n) = target.frame();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let du = (c as f64 - (cols as f64 - 1.0) / 2.0) * spacing;
            let dv = -(r as f64 - (rows as f64 - 1.0) / 2.0) * spacing;
            let eye = center + n * height + u * du + v * dv;
            let (pose, intrinsics) = match template.orientation {
                ArrayOrientation::Converging => {
                    let pose = Pose::look_at(eye, center, v)?;
                    let (fx, fy) = template.focal.focal(template.resolution.0, (center - eye).norm());
                    (pose, Intrinsics::centered(fx, fy, template.resolution))
                }
                ArrayOrientation::Parallel => {
                    let pose = Pose::look_at(eye, eye - n, v)?;
                    let (fx, fy) = template.focal.focal(template.resolution.0, height);
                    let p = pose.to_device(&center);
                    let depth = -p.z;
                    let cx = template.resolution.0 as f64 / 2.0 - fx * p.x / depth;
                    let cy = template.resolution.1 as f64 / 2.0 + fy * p.y / depth;
                    (pose, Intrinsics::new(fx, fy, cx, cy))
                }
            };
            let proj = ProjectorModel {
                id: (r * cols + c) as u32,
                pose,
                intrinsics,
                resolution: template.resolution,
                max_output: template.max_output,
                response_gamma: template.response_gamma,
            };
            proj.validate()?;
            out.push(proj);
        }
    }
    Ok(out)
}

/// A projector pixel cast onto the target and re-imaged by the camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Footprint {
    pub quad: Quad,
    /// Surface points under the four pixel corners.
    pub corners: [Point3<f64>; 4],
    /// Surface hit under the pixel center.
    pub center: SurfaceHit,
}

const PIXEL_CORNERS: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];

/// Footprint of projector pixel `(i, j)`; `None` when any corner misses the
/// target, lands on a back face, or falls behind or out of view of the camera.
pub(crate) fn cast_pixel(scene: &Scene, projector: &ProjectorModel, i: usize, j: usize) -> Option<Footprint> {
    let facing = |ray: &Ray| scene.target.intersect(ray).filter(|h| h.normal.dot(&ray.dir) < 0.0);
    let cam_center = scene.camera.center();
    let mut corners = [Point3::origin(); 4];
    let mut quad = [Point2::origin(); 4];
    for (k, (dx, dy)) in PIXEL_CORNERS.iter().enumerate() {
        let ray = projector.pixel_ray(Point2::new(i as f64 + dx, j as f64 + dy));
        let hit = facing(&ray)?;
        if hit.normal.dot(&(cam_center - hit.point)) <= 0.0 {
            return None;
        }
        corners[k] = hit.point;
        quad[k] = project_point(&scene.camera, &hit.point).ok()?;
    }
    let center = facing(&projector.pixel_ray(Point2::new(i as f64 + 0.5, j as f64 + 0.5)))?;
    if !scene.camera_sees(&center.point, false) {
        return None;
    }
    Some(Footprint {
        quad: Quad { corners: quad },
        corners,
        center,
    })
}

/// Camera-space quad covered by projector pixel `pixel`; `Ok(None)` marks an
/// off-target pixel.
pub fn pixel_footprint(projector: &ProjectorModel, pixel: (usize, usize), scene: &Scene) -> Result<Option<Quad>> {
    let (w, h) = projector.resolution;
    if pixel.0 >= w || pixel.1 >= h {
        return Err(Error::InvalidArgument(format!(
            "pixel {pixel:?} outside projector resolution {w}x{h}"
        )));
    }
    Ok(cast_pixel(scene, projector, pixel.0, pixel.1).map(|f| f.quad))
}
