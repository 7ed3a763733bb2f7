//! Structured-light correspondences, planar homographies, landmark
//! resectioning and projector response curves.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, Point2, Point3, Vector3, Vector4};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::occlusion::{visible, SurfacePoint};
use crate::scene::{project_point, Device, PlaneTarget, Scene, TargetSurface};

pub fn gray_encode(n: u32) -> u32 {
    n ^ (n >> 1)
}

pub fn gray_decode(mut g: u32) -> u32 {
    let mut n = g;
    while g > 1 {
        g >>= 1;
        n ^= g;
    }
    n
}

/// Bits needed to address `n` positions, `⌈log2 n⌉`.
pub fn code_bits(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Which coordinate a pattern encodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatternAxis {
    Column,
    Row,
}

/// Bit schedule shared by pattern generation and decoding: column bits then
/// row bits, most significant first.
pub fn pattern_schedule(w: usize, h: usize) -> Vec<(PatternAxis, u32)> {
    let cb = code_bits(w);
    let rb = code_bits(h);
    (0..cb)
        .rev()
        .map(|b| (PatternAxis::Column, b))
        .chain((0..rb).rev().map(|b| (PatternAxis::Row, b)))
        .collect()
}

/// Gray-code pattern pairs `[pattern, complement]` for a `w × h` projector.
/// In the column pattern for bit `k`, pixel `(x, y)` is lit iff bit `k` of
/// `gray_encode(x)` is set; row patterns do the same with `y`.
pub fn generate_graycode_patterns(w: usize, h: usize) -> Result<Vec<[GrayImage; 2]>> {
    if w < 2 || h < 1 || w > (1 << 31) || h > (1 << 31) {
        return Err(Error::InvalidArgument(format!("unsupported pattern size {w}x{h}")));
    }
    Ok(pattern_schedule(w, h)
        .into_iter()
        .map(|(axis, bit)| {
            let pattern = GrayImage::from_fn(w, h, |x, y| {
                let v = match axis {
                    PatternAxis::Column => x,
                    PatternAxis::Row => y,
                };
                ((gray_encode(v as u32) >> bit) & 1) as f64
            });
            let complement = pattern.map(|v| 1.0 - v);
            [pattern, complement]
        })
        .collect())
}

/// Per-camera-pixel projector coordinates; `None` marks an unseen pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceMap {
    pub width: usize,
    pub height: usize,
    pub projector_resolution: (usize, usize),
    pub coords: Vec<Option<(u32, u32)>>,
}

impl CorrespondenceMap {
    pub fn get(&self, x: usize, y: usize) -> Option<(u32, u32)> {
        self.coords[y * self.width + x]
    }

    /// Confidence mask; true exactly where a coordinate is present.
    pub fn mask(&self) -> Vec<bool> {
        self.coords.iter().map(Option::is_some).collect()
    }

    pub fn decoded_fraction(&self) -> f64 {
        self.coords.iter().filter(|c| c.is_some()).count() as f64 / self.coords.len() as f64
    }
}

/// Decodes captured pattern pairs (same order as
/// [`generate_graycode_patterns`] for a `proj_w × proj_h` projector). A bit is
/// 1 iff `pattern − complement > margin`; any bit with `|difference| ≤ margin`
/// or an out-of-range code leaves the pixel unseen.
pub fn decode_correspondence(
    captured: &[[GrayImage; 2]],
    proj_w: usize,
    proj_h: usize,
    threshold_margin: f64,
) -> Result<CorrespondenceMap> {
    let schedule = pattern_schedule(proj_w, proj_h);
    if captured.len() != schedule.len() {
        return Err(Error::StackShape {
            expected: schedule.len(),
            actual: captured.len(),
        });
    }
    if !(0.0..=1.0).contains(&threshold_margin) {
        return Err(Error::InvalidArgument("threshold margin must lie in [0, 1]".into()));
    }
    let (w, h) = match captured.first() {
        Some(pair) => pair[0].dims(),
        None => {
            return Err(Error::StackShape {
                expected: 1,
                actual: 0,
            })
        }
    };
    for pair in captured {
        if pair[0].dims() != (w, h) || pair[1].dims() != (w, h) {
            return Err(Error::ShapeMismatch("captured images differ in size".into()));
        }
    }
    let mut coords = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let mut gx = 0u32;
        let mut gy = 0u32;
        let mut seen = true;
        for ((axis, bit), pair) in schedule.iter().zip(captured) {
            let d = pair[0].data()[i] - pair[1].data()[i];
            if d.abs() <= threshold_margin {
                seen = false;
                break;
            }
            if d > threshold_margin {
                match axis {
                    PatternAxis::Column => gx |= 1 << bit,
                    PatternAxis::Row => gy |= 1 << bit,
                }
            }
        }
        let x = gray_decode(gx);
        let y = gray_decode(gy);
        coords.push((seen && (x as usize) < proj_w && (y as usize) < proj_h).then_some((x, y)));
    }
    Ok(CorrespondenceMap {
        width: w,
        height: h,
        projector_resolution: (proj_w, proj_h),
        coords,
    })
}

/// Planar projective map, scaled so the bottom-right entry is 1 when it is
/// non-zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let h = Self(normalize_h(m));
        if !(h.0.determinant().abs() > 1e-12) {
            return Err(Error::RankDeficient);
        }
        Ok(h)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn apply(&self, p: &Point2<f64>) -> Point2<f64> {
        let v = self.0 * Vector3::new(p.x, p.y, 1.0);
        Point2::new(v.x / v.z, v.y / v.z)
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Homography) -> Result<Homography> {
        Homography::new(next.0 * self.0)
    }

    pub fn inverse(&self) -> Result<Homography> {
        Homography::new(self.0.try_inverse().ok_or(Error::RankDeficient)?)
    }
}

fn normalize_h(m: Matrix3<f64>) -> Matrix3<f64> {
    let s = m[(2, 2)];
    if s.abs() > 1e-14 * m.norm() {
        m / s
    } else {
        m / m.norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomographyEstimate {
    pub homography: Homography,
    /// Estimate in the isotropically normalized coordinates.
    pub conditioned: Matrix3<f64>,
    /// Mean `‖H s − d‖` over the inputs, pixels.
    pub mean_error: f64,
}

/// Translation to the centroid and isotropic scaling to mean distance √D.
fn similarity2(pts: &[Point2<f64>]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Vector3::zeros(), |a, p| a + Vector3::new(p.x, p.y, 0.0)) / n;
    let mean = pts.iter().map(|p| ((p.x - c.x).powi(2) + (p.y - c.y).powi(2)).sqrt()).sum::<f64>() / n;
    let s = if mean > 0.0 { 2f64.sqrt() / mean } else { 1.0 };
    Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0)
}

fn similarity3(pts: &[Point3<f64>]) -> Matrix4<f64> {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mean = pts.iter().map(|p| (p.coords - c).norm()).sum::<f64>() / n;
    let s = if mean > 0.0 { 3f64.sqrt() / mean } else { 1.0 };
    let mut t = Matrix4::identity() * s;
    t[(3, 3)] = 1.0;
    t.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-c * s));
    t
}

/// Right null vector of `a` (padded with zero rows to be at least square) and
/// the ratio of the two smallest singular values' gap.
fn null_vector(a: DMatrix<f64>) -> Result<(nalgebra::DVector<f64>, f64)> {
    let cols = a.ncols();
    let a = if a.nrows() < cols {
        a.resize_vertically(cols, 0.0)
    } else {
        a
    };
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::RankDeficient)?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap());
    let largest = sv[order[0]];
    let second_smallest = sv[order[cols - 2]];
    let smallest = order[cols - 1];
    Ok((v_t.row(smallest).transpose(), second_smallest / largest.max(f64::MIN_POSITIVE)))
}

fn collinear(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> bool {
    let scale = (b - a).norm().max((c - a).norm()).max(f64::MIN_POSITIVE);
    ((b - a).perp(&(c - a))).abs() <= 1e-12 * scale * scale
}

/// Normalized DLT from `src → dst` (≥ 4 pairs).
pub fn estimate_homography(src: &[Point2<f64>], dst: &[Point2<f64>]) -> Result<HomographyEstimate> {
    if src.len() != dst.len() {
        return Err(Error::ShapeMismatch("source and destination counts differ".into()));
    }
    if src.len() < 4 {
        return Err(Error::TooFewPoints {
            required: 4,
            actual: src.len(),
        });
    }
    if src.len() == 4 {
        for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
            if collinear(&src[i], &src[j], &src[k]) || collinear(&dst[i], &dst[j], &dst[k]) {
                return Err(Error::RankDeficient);
            }
        }
    }
    let ts = similarity2(src);
    let td = similarity2(dst);
    let n = src.len();
    let mut a = DMatrix::zeros(2 * n, 9);
    for (i, (s, d)) in src.iter().zip(dst).enumerate() {
        let s = ts * Vector3::new(s.x, s.y, 1.0);
        let d = td * Vector3::new(d.x, d.y, 1.0);
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for k in 0..9 {
            a[(2 * i, k)] = r0[k];
            a[(2 * i + 1, k)] = r1[k];
        }
    }
    let (h, gap) = null_vector(a)?;
    if gap < 1e-10 {
        return Err(Error::RankDeficient);
    }
    let conditioned = normalize_h(Matrix3::from_row_slice(h.as_slice()));
    let td_inv = td.try_inverse().ok_or(Error::RankDeficient)?;
    let homography = Homography::new(td_inv * conditioned * ts)?;
    let mean_error = src
        .iter()
        .zip(dst)
        .map(|(s, d)| (homography.apply(s) - d).norm())
        .sum::<f64>()
        / n as f64;
    Ok(HomographyEstimate {
        homography,
        conditioned,
        mean_error,
    })
}

/// Homogeneous 3×4 world-to-image map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionMatrix(Matrix3x4<f64>);

impl ProjectionMatrix {
    pub fn new(m: Matrix3x4<f64>) -> Result<Self> {
        let left = m.fixed_view::<3, 3>(0, 0).into_owned();
        let scale = left.norm().max(f64::MIN_POSITIVE);
        if !(left.determinant().abs() > 1e-12 * scale.powi(3)) {
            return Err(Error::DegenerateLandmarks("left 3x3 block is singular".into()));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.0
    }

    pub fn project(&self, p: &Point3<f64>) -> Point2<f64> {
        let v = self.0 * Vector4::new(p.x, p.y, p.z, 1.0);
        Point2::new(v.x / v.z, v.y / v.z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionEstimate {
    pub matrix: ProjectionMatrix,
    /// Root-mean-square reprojection error, pixels.
    pub rms_error: f64,
}

/// Normalized DLT resectioning from ≥ 6 non-coplanar landmarks.
pub fn estimate_projection_matrix(world: &[Point3<f64>], image: &[Point2<f64>]) -> Result<ProjectionEstimate> {
    if world.len() != image.len() {
        return Err(Error::ShapeMismatch("world and image counts differ".into()));
    }
    if world.len() < 6 {
        return Err(Error::TooFewPoints {
            required: 6,
            actual: world.len(),
        });
    }
    let n = world.len();
    let centroid = world.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n as f64;
    let cov = world.iter().fold(Matrix3::zeros(), |a, p| {
        let d = p.coords - centroid;
        a + d * d.transpose()
    });
    let eig = cov.symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 1e-12 * hi) {
        return Err(Error::DegenerateLandmarks("landmarks are coplanar".into()));
    }
    let tw = similarity3(world);
    let ti = similarity2(image);
    let mut a = DMatrix::zeros(2 * n, 12);
    for (i, (x, u)) in world.iter().zip(image).enumerate() {
        let x = tw * Vector4::new(x.x, x.y, x.z, 1.0);
        let u = ti * Vector3::new(u.x, u.y, 1.0);
        for k in 0..4 {
            a[(2 * i, k)] = -x[k];
            a[(2 * i, 8 + k)] = u.x * x[k];
            a[(2 * i + 1, 4 + k)] = -x[k];
            a[(2 * i + 1, 8 + k)] = u.y * x[k];
        }
    }
    let (p, gap) = null_vector(a)?;
    if gap < 1e-10 {
        return Err(Error::DegenerateLandmarks("landmark configuration does not fix the projection".into()));
    }
    let pn = Matrix3x4::from_row_slice(p.as_slice());
    let ti_inv = ti.try_inverse().ok_or(Error::RankDeficient)?;
    let mut m = ti_inv * pn * tw;
    // unit third row direction, positive depth for the landmarks
    let r3 = m.fixed_view::<1, 3>(2, 0).norm();
    m /= r3;
    let c = world[0];
    if (m * Vector4::new(c.x, c.y, c.z, 1.0)).z < 0.0 {
        m = -m;
    }
    let matrix = ProjectionMatrix::new(m)?;
    let rms_error = (world
        .iter()
        .zip(image)
        .map(|(x, u)| (matrix.project(x) - u).norm_squared())
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(ProjectionEstimate { matrix, rms_error })
}

/// Projector luminance as a function of 8-bit input level.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseCurve {
    pub gamma: f64,
    pub max_output: f64,
    /// Measured `(level, luminance)` samples; overrides the gamma model.
    table: Option<Vec<(u8, f64)>>,
}

impl ResponseCurve {
    pub fn gamma(gamma: f64, max_output: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument("gamma must be positive".into()));
        }
        if !(max_output > 0.0 && max_output <= 1.0) {
            return Err(Error::InvalidArgument("max_output must lie in (0, 1]".into()));
        }
        Ok(Self {
            gamma,
            max_output,
            table: None,
        })
    }

    /// Measured table, sorted by level; must start at `(0, 0)`, end at
    /// `(255, max)` and be non-decreasing.
    pub fn from_table(mut table: Vec<(u8, f64)>) -> Result<Self> {
        table.sort_by_key(|e| e.0);
        table.dedup_by_key(|e| e.0);
        let (first, last) = match (table.first(), table.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return Err(Error::InvalidArgument("empty response table".into())),
        };
        if first != (0, 0.0) || last.0 != 255 {
            return Err(Error::InvalidArgument("response table must span levels 0 (at 0) to 255".into()));
        }
        if table.windows(2).any(|w| w[1].1 < w[0].1) {
            return Err(Error::InvalidArgument("response table must be non-decreasing".into()));
        }
        let max_output = last.1;
        if !(max_output > 0.0 && max_output <= 1.0) {
            return Err(Error::InvalidArgument("max_output must lie in (0, 1]".into()));
        }
        Ok(Self {
            gamma: f64::NAN,
            max_output,
            table: Some(table),
        })
    }

    pub fn table(&self) -> Option<&[(u8, f64)]> {
        self.table.as_deref()
    }

    /// Luminance at a continuous input level in `[0, 255]`.
    pub fn eval(&self, level: f64) -> f64 {
        let level = level.clamp(0.0, 255.0);
        match &self.table {
            None => self.max_output * (level / 255.0).powf(self.gamma),
            Some(t) => {
                let k = t.partition_point(|e| (e.0 as f64) <= level).clamp(1, t.len() - 1);
                let (l0, v0) = t[k - 1];
                let (l1, v1) = t[k];
                let f = (level - l0 as f64) / (l1 as f64 - l0 as f64);
                v0 + f.clamp(0.0, 1.0) * (v1 - v0)
            }
        }
    }

    /// Continuous inverse of [`Self::eval`].
    fn inverse(&self, desired: f64) -> f64 {
        match &self.table {
            None => 255.0 * (desired / self.max_output).powf(1.0 / self.gamma),
            Some(t) => {
                let k = t.partition_point(|e| e.1 < desired).clamp(1, t.len() - 1);
                let (l0, v0) = t[k - 1];
                let (l1, v1) = t[k];
                if v1 == v0 {
                    l0 as f64
                } else {
                    l0 as f64 + (desired - v0) / (v1 - v0) * (l1 as f64 - l0 as f64)
                }
            }
        }
    }
}

/// Input level reproducing `desired` luminance, rounded to the nearest level.
pub fn linearize(curve: &ResponseCurve, desired: f64) -> Result<u8> {
    if !(desired >= 0.0 && desired <= curve.max_output) {
        return Err(Error::OutOfRange {
            desired,
            max: curve.max_output,
        });
    }
    Ok(curve.inverse(desired).round().clamp(0.0, 255.0) as u8)
}

/// Luminance produced by input `level`.
pub fn delinearize(curve: &ResponseCurve, level: u8) -> f64 {
    curve.eval(level as f64)
}

/// Ground-truth continuous projector coordinates seen through each camera
/// pixel center; `None` where the projector does not light that point or the
/// camera does not see it.
pub fn true_correspondence(scene: &Scene, projector_id: u32) -> Result<Vec<Option<Point2<f64>>>> {
    let proj = scene
        .projector(projector_id)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown projector {projector_id}")))?;
    let (w, h) = scene.camera.resolution;
    let mesh = match &scene.target {
        TargetSurface::Mesh(m) => Some(m),
        TargetSurface::Plane(_) => None,
    };
    Ok((0..w * h)
        .map(|i| {
            let hit = scene.camera_surface_point(i % w, i / w)?;
            if !scene.camera_sees(&hit.point, true) {
                return None;
            }
            let sp = SurfacePoint {
                position: hit.point,
                normal: hit.normal,
            };
            if !visible(&sp, proj, &scene.occluders) {
                return None;
            }
            if mesh.is_some_and(|m| m.blocks_segment(&hit.point, &proj.center(), 1e-6)) {
                return None;
            }
            project_point(proj, &hit.point).ok()
        })
        .collect())
}

/// Camera captures of `images` shown by one projector. Each lit camera pixel
/// reads the projector pixel its surface point falls in; other pixels read 0.
/// Gaussian noise of standard deviation `noise` is added and the result
/// clamped to [0, 1].
pub fn simulate_capture(
    scene: &Scene,
    projector_id: u32,
    images: &[[GrayImage; 2]],
    noise: f64,
    rng: &mut impl Rng,
) -> Result<Vec<[GrayImage; 2]>> {
    let proj = scene
        .projector(projector_id)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown projector {projector_id}")))?;
    for pair in images {
        for img in pair {
            if img.dims() != proj.resolution {
                return Err(Error::ShapeMismatch("pattern size differs from projector resolution".into()));
            }
        }
    }
    let dist = Normal::new(0.0, noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let truth = true_correspondence(scene, projector_id)?;
    let (w, h) = scene.camera.resolution;
    let mut capture = |img: &GrayImage| -> Result<GrayImage> {
        let data = truth
            .iter()
            .map(|t| {
                let clean = t.map_or(0.0, |p| img.get(p.x.floor() as usize, p.y.floor() as usize));
                let n = if noise > 0.0 { dist.sample(rng) } else { 0.0 };
                (clean + n).clamp(0.0, 1.0)
            })
            .collect();
        GrayImage::new(w, h, data)
    };
    images.iter().map(|[a, b]| Ok([capture(a)?, capture(b)?])).collect()
}

/// Homography from plane coordinates `(a, b)` (meters along the plane axes,
/// measured from the plane origin) to the pixels of projection matrix `p`.
pub fn plane_homography(p: &Matrix3x4<f64>, plane: &PlaneTarget) -> Result<Homography> {
    let m3 = p.fixed_view::<3, 3>(0, 0);
    let t = p.column(3);
    let cu = m3 * plane.axis_u;
    let cv = m3 * plane.axis_v;
    let co = m3 * plane.origin.coords + t;
    Homography::new(Matrix3::from_columns(&[cu, cv, co]))
}

/// [`plane_homography`] for a modeled device.
pub fn plane_to_device(device: &dyn Device, plane: &PlaneTarget) -> Result<Homography> {
    plane_homography(&device.projection_matrix(), plane)
}

/// Ground-truth camera-to-projector homography induced by a planar target.
pub fn camera_to_projector(scene: &Scene, projector_id: u32) -> Result<Homography> {
    let TargetSurface::Plane(plane) = &scene.target else {
        return Err(Error::InvalidScene("planar homographies need a plane target".into()));
    };
    let proj = scene
        .projector(projector_id)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown projector {projector_id}")))?;
    let w2c = plane_to_device(&scene.camera, plane)?;
    let w2p = plane_to_device(proj, plane)?;
    w2c.inverse()?.then(&w2p)
}

/// Largest relative entry difference between two homographies after both
/// are scaled to unit Frobenius norm with matching sign.
pub fn homography_distance(a: &Homography, b: &Homography) -> f64 {
    let na = a.matrix() / a.matrix().norm();
    let mut nb = b.matrix() / b.matrix().norm();
    if na.dot(&nb) < 0.0 {
        nb = -nb;
    }
    (na - nb).abs().max()
}

/// `n` random non-coplanar landmarks in a slab above the target that
/// `projector` sees, with their exact projector pixels.
pub fn synthetic_landmarks(
    scene: &Scene,
    projector_id: u32,
    n: usize,
    rng: &mut impl Rng,
) -> Result<(Vec<Point3<f64>>, Vec<Point2<f64>>)> {
    let proj = scene
        .projector(projector_id)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown projector {projector_id}")))?;
    let (center, u, v, up) = scene.target.frame();
    let (hu, hv) = match &scene.target {
        TargetSurface::Plane(p) => (p.extent.0 / 2.0, p.extent.1 / 2.0),
        TargetSurface::Mesh(m) => {
            let (lo, hi) = m.bounds();
            ((hi.x - lo.x) / 2.0, (hi.y - lo.y) / 2.0)
        }
    };
    let mut world = Vec::with_capacity(n);
    let mut image = Vec::with_capacity(n);
    let mut tries = 0;
    while world.len() < n {
        tries += 1;
        if tries > 1000 * n.max(1) {
            return Err(Error::DegenerateLandmarks("projector sees too little of the target".into()));
        }
        let x = center + u * rng.random_range(-hu..hu) + v * rng.random_range(-hv..hv) + up * rng.random_range(0.0..0.3);
        if let Ok(px) = project_point(proj, &x) {
            if proj.in_image(&px) {
                world.push(x);
                image.push(px);
            }
        }
    }
    Ok((world, image))
}
