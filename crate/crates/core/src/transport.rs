//! Sparse light-transport matrices and the forward model `c = Σ L_i p_i`.
//!
//! Rows index camera pixels and columns index input pixels, both row-major.
//! A *native* transport takes the projector's own pixel grid as input; a
//! *registered* transport takes an image on the camera grid, which the
//! projector resamples (bilinearly) into its own pixels before display. Only
//! registered transports share a column space and can be merged.

use nalgebra::{DMatrix, Point2, Point3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::clipped_area;
use crate::image::GrayImage;
use crate::scene::{cast_pixel, Device, Footprint, ProjectorModel, Radiometry, Scene};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Projector(u32),
    Merged,
    Synthetic,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Projector(id) => write!(f, "projector:{id}"),
            Provenance::Merged => f.write_str("merged"),
            Provenance::Synthetic => f.write_str("synthetic"),
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "merged" => Ok(Provenance::Merged),
            "synthetic" => Ok(Provenance::Synthetic),
            _ => s
                .strip_prefix("projector:")
                .and_then(|id| id.parse().ok())
                .map(Provenance::Projector)
                .ok_or_else(|| Error::Parse(format!("unknown provenance '{s}'"))),
        }
    }
}

/// Compressed-sparse-row transport matrix with non-negative weights.
#[derive(Clone, Debug, PartialEq)]
pub struct LightTransport {
    out_dims: (usize, usize),
    in_dims: (usize, usize),
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    provenance: Provenance,
    off_target: bool,
}

impl LightTransport {
    /// Assembles from `(row, col, weight)` triplets; duplicates are summed in
    /// input order and explicit zeros dropped.
    pub fn from_triplets(
        out_dims: (usize, usize),
        in_dims: (usize, usize),
        mut triplets: Vec<(usize, usize, f64)>,
        provenance: Provenance,
    ) -> Result<Self> {
        let rows = out_dims.0 * out_dims.1;
        let cols = in_dims.0 * in_dims.1;
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("transport dimensions must be positive".into()));
        }
        for &(r, c, v) in &triplets {
            if r >= rows || c >= cols {
                return Err(Error::ShapeMismatch(format!("entry ({r}, {c}) outside {rows}x{cols}")));
            }
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("transport weight {v} at ({r}, {c}) must be finite and ≥ 0")));
            }
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut t = Self {
            out_dims,
            in_dims,
            row_ptr,
            col_idx,
            values,
            provenance,
            off_target: false,
        };
        t.prune_zeros();
        Ok(t)
    }

    fn prune_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut row_ptr = vec![0usize; self.row_ptr.len()];
        let mut col_idx = Vec::with_capacity(self.col_idx.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.values[k] != 0.0 {
                    col_idx.push(self.col_idx[k]);
                    values.push(self.values[k]);
                }
            }
            row_ptr[r + 1] = values.len();
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.values = values;
    }

    pub fn scaled_identity(dims: (usize, usize), s: f64) -> Result<Self> {
        let n = dims.0 * dims.1;
        Self::from_triplets(dims, dims, (0..n).map(|i| (i, i, s)).collect(), Provenance::Synthetic)
    }

    pub fn identity(dims: (usize, usize)) -> Result<Self> {
        Self::scaled_identity(dims, 1.0)
    }

    /// Dense non-negative matrix (tests and tiny examples).
    pub fn from_dense(out_dims: (usize, usize), in_dims: (usize, usize), m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != out_dims.0 * out_dims.1 || m.ncols() != in_dims.0 * in_dims.1 {
            return Err(Error::ShapeMismatch("dense matrix does not match dimensions".into()));
        }
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != 0.0 {
                    t.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(out_dims, in_dims, t, Provenance::Synthetic)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows(), self.cols());
        for r in 0..self.rows() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.in_dims.0 * self.in_dims.1
    }

    /// Camera image dimensions `(w, h)`.
    pub fn out_dims(&self) -> (usize, usize) {
        self.out_dims
    }

    /// Input image dimensions `(w, h)`.
    pub fn in_dims(&self) -> (usize, usize) {
        self.in_dims
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Set when the source projector lands nowhere on the target.
    pub fn is_off_target(&self) -> bool {
        self.off_target
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let s = self.row_ptr[r];
        let e = self.row_ptr[r + 1];
        (&self.col_idx[s..e], &self.values[s..e])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn max_row_len(&self) -> usize {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows()).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut t = self.clone();
        t.values.iter_mut().for_each(|v| *v *= s);
        t.prune_zeros();
        t
    }

    /// `y = L x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols());
        debug_assert_eq!(y.len(), self.rows());
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    /// Row-parallel `y = L x`; bit-identical to [`Self::mul_vec_into`].
    pub fn par_mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        y.par_chunks_mut(1024).enumerate().for_each(|(chunk, ys)| {
            let base = chunk * 1024;
            for (i, out) in ys.iter_mut().enumerate() {
                let r = base + i;
                let mut acc = 0.0;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.values[k] * x[self.col_idx[k]];
                }
                *out = acc;
            }
        });
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Explicit transpose, so `Lᵀ x` is also a row-wise product.
    pub fn transpose(&self) -> Self {
        let cols = self.cols();
        let mut counts = vec![0usize; cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..cols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.rows() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                col_idx[next[c]] = r;
                values[next[c]] = self.values[k];
                next[c] += 1;
            }
        }
        Self {
            out_dims: self.in_dims,
            in_dims: self.out_dims,
            row_ptr,
            col_idx,
            values,
            provenance: self.provenance,
            off_target: self.off_target,
        }
    }

    /// Fails when any row holds more than `cap` entries.
    pub fn check_row_cap(&self, cap: usize) -> Result<()> {
        for r in 0..self.rows() {
            let count = self.row_ptr[r + 1] - self.row_ptr[r];
            if count > cap {
                return Err(Error::FootprintOverflow { row: r, count, cap });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportOptions {
    /// Maximum entries per row before construction fails.
    pub footprint_cap: usize,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self { footprint_cap: 64 }
    }
}

/// Fraction of the five footprint rays (center + corners) that reach the
/// projector without crossing an occluder.
pub(crate) fn unblocked_fraction(scene: &Scene, projector: &ProjectorModel, fp: &Footprint) -> f64 {
    if scene.occluders.is_empty() {
        return 1.0;
    }
    let c = projector.center();
    let pts = std::iter::once(fp.center.point).chain(fp.corners.iter().copied());
    let free = pts
        .filter(|p| !scene.occluders.iter().any(|o| o.blocks_segment(p, &c)))
        .count();
    free as f64 / 5.0
}

/// Per-pixel weight before area clipping: radiometric falloff relative to the
/// reference projector times the unblocked fraction.
pub(crate) fn footprint_weight(
    scene: &Scene,
    projector: &ProjectorModel,
    fp: &Footprint,
    reference: f64,
    include_occluders: bool,
) -> f64 {
    let radiometric = match scene.radiometry {
        Radiometry::Uniform => 1.0,
        Radiometry::InverseSquareCosine => Scene::falloff(&projector.center(), &fp.center) / reference,
    };
    let vis = if include_occluders {
        unblocked_fraction(scene, projector, fp)
    } else {
        1.0
    };
    radiometric * vis
}

/// Area of `fp`'s quad over each camera pixel, as `(camera pixel, area)`.
pub(crate) fn footprint_overlaps(fp: &Footprint, cam_dims: (usize, usize)) -> Vec<(usize, f64)> {
    let (w, h) = cam_dims;
    let (x0, y0, x1, y1) = fp.quad.bounds();
    let xs = x0.floor().max(0.0) as i64;
    let ys = y0.floor().max(0.0) as i64;
    let xe = (x1.ceil() as i64).min(w as i64);
    let ye = (y1.ceil() as i64).min(h as i64);
    let mut out = Vec::new();
    for y in ys..ye {
        for x in xs..xe {
            let a = clipped_area(&fp.quad.corners, x as f64, y as f64, x as f64 + 1.0, y as f64 + 1.0);
            if a > 0.0 {
                out.push((y as usize * w + x as usize, a));
            }
        }
    }
    out
}

fn projector_or_err<'a>(scene: &'a Scene, id: u32) -> Result<&'a ProjectorModel> {
    scene
        .projector(id)
        .ok_or_else(|| Error::InvalidArgument(format!("no projector with id {id}")))
}

fn assemble(
    scene: &Scene,
    projector: &ProjectorModel,
    in_dims: (usize, usize),
    include_occluders: bool,
    opts: &TransportOptions,
    columns: impl Fn(usize, usize, &Footprint) -> Vec<(usize, f64)> + Sync,
) -> Result<LightTransport> {
    let (pw, ph) = projector.resolution;
    let cam_dims = scene.camera.resolution;
    let reference = scene.reference_falloff();
    let rows: Vec<Vec<(usize, usize, f64)>> = (0..ph)
        .into_par_iter()
        .map(|j| {
            let mut t = Vec::new();
            for i in 0..pw {
                let Some(fp) = cast_pixel(scene, projector, i, j) else {
                    continue;
                };
                let weight = footprint_weight(scene, projector, &fp, reference, include_occluders);
                if weight == 0.0 {
                    continue;
                }
                let cols = columns(i, j, &fp);
                if cols.is_empty() {
                    continue;
                }
                for (q, area) in footprint_overlaps(&fp, cam_dims) {
                    for &(c, s) in &cols {
                        t.push((q, c, weight * area * s));
                    }
                }
            }
            t
        })
        .collect();
    let triplets: Vec<_> = rows.into_iter().flatten().collect();
    let off_target = triplets.is_empty();
    let mut l = LightTransport::from_triplets(cam_dims, in_dims, triplets, Provenance::Projector(projector.id))?;
    l.off_target = off_target;
    l.check_row_cap(opts.footprint_cap)?;
    Ok(l)
}

/// Transport from projector `projector_id`'s native pixels to the camera.
///
/// Entry `(q, r)` is the area (in camera pixels) of pixel `r`'s footprint
/// inside camera pixel `q`, times the radiometric factor, times the
/// unblocked fraction of its five rays when `include_occluders` is set.
pub fn build_transport(scene: &Scene, projector_id: u32, include_occluders: bool) -> Result<LightTransport> {
    build_transport_with(scene, projector_id, include_occluders, &TransportOptions::default())
}

pub fn build_transport_with(
    scene: &Scene,
    projector_id: u32,
    include_occluders: bool,
    opts: &TransportOptions,
) -> Result<LightTransport> {
    let p = projector_or_err(scene, projector_id)?;
    let pw = p.resolution.0;
    assemble(scene, p, p.resolution, include_occluders, opts, |i, j, _| vec![(j * pw + i, 1.0)])
}

/// Bilinear weights of camera-grid content sampled at continuous camera
/// coordinates `at`; empty outside the content rectangle.
pub(crate) fn content_samples(at: Point2<f64>, dims: (usize, usize)) -> Vec<(usize, f64)> {
    let (w, h) = dims;
    if !(at.x >= 0.0 && at.y >= 0.0 && at.x <= w as f64 && at.y <= h as f64) {
        return Vec::new();
    }
    let sx = (at.x - 0.5).clamp(0.0, (w - 1) as f64);
    let sy = (at.y - 0.5).clamp(0.0, (h - 1) as f64);
    let x0 = (sx.floor() as usize).min(w.saturating_sub(2));
    let y0 = (sy.floor() as usize).min(h.saturating_sub(2));
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let mut out = Vec::with_capacity(4);
    for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
        for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
            let wgt = wx * wy;
            let (x, y) = (x0 + dx, y0 + dy);
            if wgt > 0.0 && x < w && y < h {
                out.push((y * w + x, wgt));
            }
        }
    }
    out
}

/// Transport from a camera-grid content image through projector
/// `projector_id` to the camera. Each projector pixel displays the content
/// sampled where its center lands in the camera image, which aligns all
/// projectors on the same content.
pub fn build_registered_transport(scene: &Scene, projector_id: u32, include_occluders: bool) -> Result<LightTransport> {
    build_registered_transport_with(scene, projector_id, include_occluders, &TransportOptions::default())
}

pub fn build_registered_transport_with(
    scene: &Scene,
    projector_id: u32,
    include_occluders: bool,
    opts: &TransportOptions,
) -> Result<LightTransport> {
    let p = projector_or_err(scene, projector_id)?;
    let cam = &scene.camera;
    let dims = cam.resolution;
    assemble(scene, p, dims, include_occluders, opts, |_, _, fp| {
        match crate::scene::project_point(cam, &fp.center.point) {
            Ok(at) => content_samples(at, dims),
            Err(_) => Vec::new(),
        }
    })
}

/// Registered transports for every projector in scene order.
pub fn build_registered_set(scene: &Scene, include_occluders: bool) -> Result<Vec<LightTransport>> {
    scene
        .projectors
        .iter()
        .map(|p| build_registered_transport(scene, p.id, include_occluders))
        .collect()
}

fn check_same_shape(parts: &[LightTransport]) -> Result<()> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty transport list".into()))?;
    for p in parts {
        if p.out_dims != first.out_dims || p.in_dims != first.in_dims {
            return Err(Error::ShapeMismatch(format!(
                "transport {:?}->{:?} vs {:?}->{:?}",
                p.in_dims, p.out_dims, first.in_dims, first.out_dims
            )));
        }
    }
    Ok(())
}

/// Elementwise sum `L = Σ L_i`.
pub fn merge_transport(parts: &[LightTransport]) -> Result<LightTransport> {
    check_same_shape(parts)?;
    let first = &parts[0];
    let mut triplets = Vec::with_capacity(parts.iter().map(|p| p.nnz()).sum());
    for p in parts {
        for r in 0..p.rows() {
            let (cols, vals) = p.row(r);
            triplets.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, v)));
        }
    }
    let mut l = LightTransport::from_triplets(first.out_dims, first.in_dims, triplets, Provenance::Merged)?;
    l.off_target = parts.iter().all(|p| p.off_target);
    Ok(l)
}

/// Camera image `L p`; values may exceed 1.
pub fn apply_transport(l: &LightTransport, p: &GrayImage) -> Result<GrayImage> {
    if p.dims() != l.in_dims {
        return Err(Error::ShapeMismatch(format!(
            "input {:?} does not match transport input {:?}",
            p.dims(),
            l.in_dims
        )));
    }
    GrayImage::from_raw(l.out_dims.0, l.out_dims.1, l.mul_vec(p.data()))
}

/// `Σ L_i p_i`.
pub fn apply_sum(parts: &[LightTransport], images: &[GrayImage]) -> Result<GrayImage> {
    check_same_shape(parts)?;
    if parts.len() != images.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} transports but {} images",
            parts.len(),
            images.len()
        )));
    }
    let (w, h) = parts[0].out_dims;
    let mut acc = vec![0.0; w * h];
    for (l, p) in parts.iter().zip(images) {
        let c = apply_transport(l, p)?;
        acc.iter_mut().zip(c.data()).for_each(|(a, v)| *a += v);
    }
    GrayImage::from_raw(w, h, acc)
}

/// Scale `s` such that `mean(Σ L_i (s p_i)) = mean(L_ref p_ref)`.
pub fn normalize_brightness(
    images: &[GrayImage],
    reference: &GrayImage,
    parts: &[LightTransport],
    l_ref: &LightTransport,
) -> Result<f64> {
    let target = apply_transport(l_ref, reference)?.mean();
    if !(target > 0.0) {
        return Err(Error::ZeroBrightness);
    }
    let current = apply_sum(parts, images)?.mean();
    if !(current > 0.0) {
        return Err(Error::ZeroBrightness);
    }
    Ok(target / current)
}

/// Camera value of the dimmest well-lit pixel under full-white input: the
/// smallest row sum among rows reaching at least half the median row sum.
/// Targets expressed as fractions of this level are reachable everywhere
/// except at the fringe of the lit area.
pub fn white_level(l: &LightTransport) -> Result<f64> {
    let mut sums: Vec<f64> = l.row_sums().into_iter().filter(|&v| v > 0.0).collect();
    if sums.is_empty() {
        return Err(Error::ZeroBrightness);
    }
    sums.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sums[sums.len() / 2];
    Ok(sums.into_iter().find(|&v| v >= 0.5 * median).unwrap_or(median))
}

/// Surface point under a projector pixel center; used by tests and oracles.
pub fn pixel_center_on_surface(scene: &Scene, projector: &ProjectorModel, i: usize, j: usize) -> Option<Point3<f64>> {
    cast_pixel(scene, projector, i, j).map(|f| f.center.point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{CameraModel, Intrinsics, PlaneTarget, Pose, Radiometry, TargetSurface};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coaxial_scene(shift_px: f64) -> Scene {
        let res = (12, 10);
        let cam = CameraModel {
            pose: Pose::look_at(Point3::new(0.0, 0.0, 1.0), Point3::origin(), Vector3::y()).unwrap(),
            intrinsics: Intrinsics::centered(30.0, 30.0, res),
            resolution: res,
        };
        // shifting the principal point by one pixel moves the image one pixel
        let mut k = cam.intrinsics;
        k.cx += shift_px;
        let proj = ProjectorModel {
            id: 3,
            pose: cam.pose,
            intrinsics: k,
            resolution: res,
            max_output: 1.0,
            response_gamma: 2.2,
        };
        let plane = PlaneTarget::new(Point3::origin(), Vector3::x(), Vector3::y(), (2.0, 2.0)).unwrap();
        Scene::new(vec![proj], TargetSurface::Plane(plane), cam, vec![])
            .unwrap()
            .with_radiometry(Radiometry::Uniform)
    }

    #[test]
    fn coaxial_is_identity() {
        let s = coaxial_scene(0.0);
        let l = build_transport(&s, 3, false).unwrap();
        let d = l.to_dense();
        assert_relative_eq!(d, DMatrix::identity(120, 120), epsilon = 1e-9);
        assert_eq!(l.provenance(), Provenance::Projector(3));
        let reg = build_registered_transport(&s, 3, false).unwrap();
        assert_relative_eq!(reg.to_dense(), DMatrix::identity(120, 120), epsilon = 1e-9);
    }

    #[test]
    fn coaxial_diagonal_follows_falloff() {
        let s = coaxial_scene(0.0).with_radiometry(Radiometry::InverseSquareCosine);
        let l = build_transport(&s, 3, false).unwrap();
        assert_eq!(l.nnz(), 120);
        for y in 0..10 {
            for x in 0..12 {
                // device 1 m above the plane: cos/d² relative to the axis is (1 + r²)^-1.5
                let px = (x as f64 + 0.5 - 6.0) / 30.0;
                let py = (y as f64 + 0.5 - 5.0) / 30.0;
                let expect = (1.0 + px * px + py * py).powf(-1.5);
                assert_relative_eq!(l.get(y * 12 + x, y * 12 + x), expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn half_pixel_shift_splits_rows() {
        let s = coaxial_scene(0.5);
        let l = build_transport(&s, 3, false).unwrap();
        // interior rows: two entries of 0.5
        for y in 0..10 {
            for x in 1..11 {
                let (cols, vals) = l.row(y * 12 + x);
                assert_eq!(cols.len(), 2, "row ({x},{y})");
                for v in vals {
                    assert_relative_eq!(*v, 0.5, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn merge_and_superposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dims = (6, 5);
        let parts: Vec<LightTransport> = (0..25)
            .map(|_| {
                let t = (0..40)
                    .map(|_| (rng.random_range(0..30), rng.random_range(0..30), rng.random::<f64>()))
                    .collect();
                LightTransport::from_triplets(dims, dims, t, Provenance::Synthetic).unwrap()
            })
            .collect();
        let merged = merge_transport(&parts).unwrap();
        assert_eq!(merged.provenance(), Provenance::Merged);
        let dense: DMatrix<f64> = parts.iter().map(|p| p.to_dense()).fold(DMatrix::zeros(30, 30), |a, b| a + b);
        assert!((merged.to_dense() - &dense).abs().max() < 1e-12);

        let p = GrayImage::from_fn(6, 5, |_, _| rng.random());
        let lhs = apply_transport(&merged, &p).unwrap();
        let rhs = apply_sum(&parts, &vec![p.clone(); 25]).unwrap();
        for (a, b) in lhs.data().iter().zip(rhs.data()) {
            assert!((a - b).abs() < 1e-12);
        }

        let single = merge_transport(&parts[..1]).unwrap();
        assert_eq!(single.to_dense(), parts[0].to_dense());
        let zero = LightTransport::from_triplets(dims, dims, vec![], Provenance::Synthetic).unwrap();
        assert_eq!(merge_transport(&[parts[0].clone(), zero]).unwrap().to_dense(), parts[0].to_dense());
    }

    #[test]
    fn merge_rejects_mismatch() {
        let a = LightTransport::identity((2, 2)).unwrap();
        let b = LightTransport::identity((3, 2)).unwrap();
        assert!(matches!(merge_transport(&[a.clone(), b]), Err(Error::ShapeMismatch(_))));
        assert!(apply_transport(&a, &GrayImage::filled(3, 3, 0.1)).is_err());
    }

    #[test]
    fn white_level_skips_the_fringe() {
        let mut t: Vec<_> = (0..10).map(|i| (i, i, 1.0 + i as f64 * 0.1)).collect();
        t.push((10, 10, 0.2));
        let l = LightTransport::from_triplets((12, 1), (12, 1), t, Provenance::Synthetic).unwrap();
        assert_relative_eq!(white_level(&l).unwrap(), 1.0);
        let empty = LightTransport::from_triplets((2, 1), (2, 1), vec![], Provenance::Synthetic).unwrap();
        assert!(matches!(white_level(&empty), Err(Error::ZeroBrightness)));
    }

    #[test]
    fn twenty_five_unit_projectors_sum_to_one() {
        let dims = (4, 4);
        let parts = vec![LightTransport::identity(dims).unwrap(); 25];
        let out = apply_sum(&parts, &vec![GrayImage::filled(4, 4, 0.04); 25]).unwrap();
        for v in out.data() {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn brightness_scale() {
        let dims = (3, 3);
        let one = LightTransport::identity(dims).unwrap();
        let img = GrayImage::filled(3, 3, 0.5);
        let s = normalize_brightness(&[img.clone()], &img, &[one.clone()], &one).unwrap();
        assert_relative_eq!(s, 1.0);
        let s = normalize_brightness(&vec![img.clone(); 25], &img, &vec![one.clone(); 25], &one).unwrap();
        assert_relative_eq!(s, 1.0 / 25.0, epsilon = 1e-15);
        let dark = GrayImage::filled(3, 3, 0.0);
        assert!(matches!(
            normalize_brightness(&[img], &dark, &[one.clone()], &one),
            Err(Error::ZeroBrightness)
        ));
    }

    #[test]
    fn transpose_roundtrip() {
        let t = vec![(0, 1, 2.0), (1, 0, 3.0), (1, 2, 1.0), (2, 2, 4.0)];
        let l = LightTransport::from_triplets((3, 1), (3, 1), t, Provenance::Synthetic).unwrap();
        assert_eq!(l.transpose().to_dense(), l.to_dense().transpose());
        assert_eq!(l.transpose().transpose(), l);
    }

    #[test]
    fn rejects_negative_weights_and_caps_rows() {
        assert!(LightTransport::from_triplets((2, 1), (2, 1), vec![(0, 0, -1.0)], Provenance::Synthetic).is_err());
        let t = (0..5).map(|c| (0, c, 1.0)).collect();
        let l = LightTransport::from_triplets((5, 1), (5, 1), t, Provenance::Synthetic).unwrap();
        assert!(matches!(l.check_row_cap(4), Err(Error::FootprintOverflow { row: 0, count: 5, cap: 4 })));
        assert!(l.check_row_cap(5).is_ok());
    }

    #[test]
    fn footprint_cap_is_enforced_during_build() {
        // 5x finer projector: about 25 projector pixels land in each camera pixel
        let mut s = coaxial_scene(0.0);
        s.projectors[0].resolution = (60, 50);
        s.projectors[0].intrinsics = Intrinsics::centered(150.0, 150.0, (60, 50));
        let opts = TransportOptions { footprint_cap: 4 };
        assert!(matches!(
            build_transport_with(&s, 3, false, &opts),
            Err(Error::FootprintOverflow { .. })
        ));
    }

    #[test]
    fn off_target_projector_flags() {
        let mut s = coaxial_scene(0.0);
        s.projectors[0].pose = Pose::look_at(Point3::new(0.0, 0.0, 1.0), Point3::new(10.0, 0.0, 0.0), Vector3::y()).unwrap();
        let l = build_transport(&s, 3, false).unwrap();
        assert!(l.is_off_target());
        assert_eq!(l.nnz(), 0);
    }

    #[test]
    fn bilinear_samples() {
        let s = content_samples(Point2::new(1.5, 1.5), (4, 4));
        assert_eq!(s, vec![(5, 1.0)]);
        let s = content_samples(Point2::new(1.0, 1.5), (4, 4));
        let total: f64 = s.iter().map(|x| x.1).sum();
        assert_relative_eq!(total, 1.0);
        assert!(content_samples(Point2::new(-0.1, 1.0), (4, 4)).is_empty());
        // edge of the content rectangle clamps to the border pixel
        assert_eq!(content_samples(Point2::new(0.1, 0.1), (4, 4)), vec![(0, 1.0)]);
    }

    #[test]
    fn unknown_projector_errors() {
        assert!(build_transport(&coaxial_scene(0.0), 99, false).is_err());
    }
}
