//! Visibility tests, projector-coverage counts and relative-illuminance
//! shadow analysis.

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::scene::{project_point, Device, Occluder, ProjectorModel, Scene, TargetSurface};
use crate::transport::{apply_transport, build_registered_set, merge_transport, LightTransport};

/// Default relative-illuminance threshold below which a pixel counts as shadow.
pub const DEFAULT_SHADOW_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub position: Point3<f64>,
    pub normal: Vector3<f64>,
}

/// True iff the surface faces the projector, projects inside its image, and
/// no occluder crosses the open segment to its optical center.
pub fn visible(point: &SurfacePoint, projector: &ProjectorModel, occluders: &[Occluder]) -> bool {
    let c = projector.center();
    if point.normal.dot(&(c - point.position)) <= 0.0 {
        return false;
    }
    match project_point(projector, &point.position) {
        Ok(px) if projector.in_image(&px) => {}
        _ => return false,
    }
    !occluders.iter().any(|o| o.blocks_segment(&point.position, &c))
}

/// Per-camera-pixel count of projectors that see the surface point under the
/// pixel; `None` where the pixel sees no surface.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageMap {
    pub width: usize,
    pub height: usize,
    pub projector_count: usize,
    pub counts: Vec<Option<u16>>,
}

impl CoverageMap {
    pub fn get(&self, x: usize, y: usize) -> Option<u16> {
        self.counts[y * self.width + x]
    }

    /// `Σ (N − count)` over pixels with a surface.
    pub fn deficit(&self) -> usize {
        self.counts
            .iter()
            .flatten()
            .map(|&c| self.projector_count - c as usize)
            .sum()
    }
}

fn self_occluder(scene: &Scene) -> Option<SelfShadow<'_>> {
    match &scene.target {
        TargetSurface::Mesh(m) => Some(SelfShadow(m)),
        TargetSurface::Plane(_) => None,
    }
}

struct SelfShadow<'a>(&'a crate::scene::TriangleMesh);

impl SelfShadow<'_> {
    fn blocks(&self, a: &Point3<f64>, b: &Point3<f64>) -> bool {
        self.0.blocks_segment(a, b, 1e-6)
    }
}

/// Coverage counts for every camera pixel. Mesh targets also shadow
/// themselves.
pub fn coverage_map(scene: &Scene) -> CoverageMap {
    let (w, h) = scene.camera.resolution;
    let shadow = self_occluder(scene);
    let counts: Vec<Option<u16>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let hit = scene.camera_surface_point(i % w, i / w)?;
            let sp = SurfacePoint {
                position: hit.point,
                normal: hit.normal,
            };
            let n = scene
                .projectors
                .iter()
                .filter(|p| visible(&sp, p, &scene.occluders))
                .filter(|p| shadow.as_ref().is_none_or(|s| !s.blocks(&sp.position, &p.center())))
                .count();
            Some(n as u16)
        })
        .collect();
    CoverageMap {
        width: w,
        height: h,
        projector_count: scene.projectors.len(),
        counts,
    }
}

/// Why a shadow-report pixel carries no illuminance value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Undefined {
    /// The camera ray misses the target.
    NoSurface,
    /// An occluder hides the surface from the camera.
    ViewBlocked,
    /// No light reaches the pixel even without occluders.
    Unlit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShadowReport {
    /// Occluded over free render, clamped to `[0, 1]`; 0 where undefined.
    pub illuminance: GrayImage,
    pub undefined: Vec<Option<Undefined>>,
    /// True exactly at defined pixels with illuminance below `threshold`.
    pub mask: Vec<bool>,
    pub threshold: f64,
    pub shadow_pixels: usize,
    /// Summed surface area of masked pixels, m².
    pub shadow_area_m2: f64,
    /// Minimum over defined pixels.
    pub min_illuminance: Option<f64>,
    pub defined_pixels: usize,
}

impl ShadowReport {
    pub fn is_defined(&self, x: usize, y: usize) -> bool {
        self.undefined[y * self.illuminance.width() + x].is_none()
    }
}

/// Relative illuminance `(Σ L_occ p) ⊘ (Σ L_free p)` from prebuilt merged
/// transports.
pub fn shadow_report(
    scene: &Scene,
    free: &LightTransport,
    occluded: &LightTransport,
    p: &GrayImage,
    threshold: f64,
) -> Result<ShadowReport> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument("shadow threshold must lie in [0, 1]".into()));
    }
    let lit = apply_transport(free, p)?;
    let shaded = apply_transport(occluded, p)?;
    let (w, h) = lit.dims();
    if scene.camera.resolution != (w, h) {
        return Err(Error::ShapeMismatch("transports do not match the scene camera".into()));
    }
    let cam = scene.camera.center();
    let undefined: Vec<Option<Undefined>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let Some(hit) = scene.camera_surface_point(i % w, i / w) else {
                return Some(Undefined::NoSurface);
            };
            if scene.occluders.iter().any(|o| o.blocks_segment(&cam, &hit.point)) {
                return Some(Undefined::ViewBlocked);
            }
            (lit.data()[i] <= 0.0).then_some(Undefined::Unlit)
        })
        .collect();
    let mut illum = vec![0.0; w * h];
    let mut mask = vec![false; w * h];
    let mut min = None::<f64>;
    let mut area = 0.0;
    let mut defined = 0;
    for i in 0..w * h {
        if undefined[i].is_some() {
            continue;
        }
        defined += 1;
        let v = (shaded.data()[i] / lit.data()[i]).clamp(0.0, 1.0);
        illum[i] = v;
        min = Some(min.map_or(v, |m| m.min(v)));
        if v < threshold {
            mask[i] = true;
            area += scene.camera_pixel_area(i % w, i / w).unwrap_or(0.0);
        }
    }
    let shadow_pixels = mask.iter().filter(|&&m| m).count();
    Ok(ShadowReport {
        illuminance: GrayImage::from_raw(w, h, illum)?,
        undefined,
        mask,
        threshold,
        shadow_pixels,
        shadow_area_m2: area,
        min_illuminance: min,
        defined_pixels: defined,
    })
}

/// Builds free and occluded registered transports for every projector and
/// reports relative illuminance for content image `p`.
pub fn render_illuminance(scene: &Scene, p: &GrayImage, threshold: f64) -> Result<ShadowReport> {
    let free = merge_transport(&build_registered_set(scene, false)?)?;
    let occluded = merge_transport(&build_registered_set(scene, true)?)?;
    shadow_report(scene, &free, &occluded, p, threshold)
}
