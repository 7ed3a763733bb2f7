//! Ready-made targets, scenes and test images for the desk-scale setup.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::scene::{
    make_grid_array, CameraModel, FocalSpec, Occluder, PlaneTarget, ProjectorTemplate, Scene, TargetSurface,
};

/// Tabletop size in meters.
pub const TABLETOP_EXTENT: (f64, f64) = (1.2, 0.6);
/// Distance between the ceiling array and the table.
pub const ARRAY_HEIGHT: f64 = 1.4;
pub const ARRAY_SPACING: f64 = 0.3;

/// Horizontal table centered at the origin, normal +z.
pub fn tabletop() -> TargetSurface {
    TargetSurface::Plane(PlaneTarget::new(Point3::origin(), Vector3::x(), Vector3::y(), TABLETOP_EXTENT).unwrap())
}

/// Camera at `eye` looking at the table center, covering `field_width`
/// meters horizontally there.
pub fn table_camera(eye: Point3<f64>, resolution: (usize, usize), field_width: f64) -> Result<CameraModel> {
    CameraModel::look_at(eye, Point3::origin(), Vector3::y(), resolution, FocalSpec::FieldWidth(field_width))
}

/// `rows × cols` array at the standard height and spacing over the table.
pub fn tabletop_scene(
    rows: usize,
    cols: usize,
    template: &ProjectorTemplate,
    camera: CameraModel,
    occluders: Vec<Occluder>,
) -> Result<Scene> {
    let target = tabletop();
    let projectors = make_grid_array(rows, cols, ARRAY_SPACING, ARRAY_HEIGHT, &target, template)?;
    Scene::new(projectors, target, camera, occluders)
}

/// Synthetic test images with values in [0.1, 0.9].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Pattern {
    Checker,
    Rings,
    Gradient,
    /// Seeded noise smoothed by a 3×3 box.
    Noise,
    /// Rings plus checker plus noise; fine detail that blur destroys.
    #[default]
    Mixed,
    Constant(f64),
}

impl std::str::FromStr for Pattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "checker" => Ok(Pattern::Checker),
            "rings" => Ok(Pattern::Rings),
            "gradient" => Ok(Pattern::Gradient),
            "noise" => Ok(Pattern::Noise),
            "mixed" => Ok(Pattern::Mixed),
            _ => match s.strip_prefix("constant:").map(str::parse::<f64>) {
                Some(Ok(v)) if (0.0..=1.0).contains(&v) => Ok(Pattern::Constant(v)),
                _ => Err(Error::Parse(format!("unknown pattern {s:?}"))),
            },
        }
    }
}

impl Pattern {
    pub fn render(&self, width: usize, height: usize, seed: u64) -> GrayImage {
        let (w, h) = (width as f64, height as f64);
        let checker = |x: usize, y: usize| if (x / 4 + y / 4) % 2 == 0 { 1.0 } else { 0.0 };
        let rings = |x: usize, y: usize| {
            let r = ((x as f64 + 0.5 - w / 2.0).powi(2) + (y as f64 + 0.5 - h / 2.0).powi(2)).sqrt();
            0.5 + 0.5 * (r * std::f64::consts::PI / 3.0).cos()
        };
        let noise = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw: Vec<f64> = (0..width * height).map(|_| rng.random()).collect();
            GrayImage::from_fn(width, height, |x, y| {
                let mut acc = 0.0;
                let mut n = 0.0;
                for yy in y.saturating_sub(1)..(y + 2).min(height) {
                    for xx in x.saturating_sub(1)..(x + 2).min(width) {
                        acc += raw[yy * width + xx];
                        n += 1.0;
                    }
                }
                acc / n
            })
        };
        let unit = match *self {
            Pattern::Checker => GrayImage::from_fn(width, height, checker),
            Pattern::Rings => GrayImage::from_fn(width, height, rings),
            Pattern::Gradient => GrayImage::from_fn(width, height, |x, _| x as f64 / (w - 1.0).max(1.0)),
            Pattern::Noise => noise(),
            Pattern::Mixed => {
                let n = noise();
                GrayImage::from_fn(width, height, |x, y| {
                    0.45 * rings(x, y) + 0.35 * checker(x, y) + 0.2 * n.get(x, y)
                })
            }
            Pattern::Constant(v) => return GrayImage::filled(width, height, v),
        };
        unit.map(|v| 0.1 + 0.8 * v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patterns_stay_in_range_and_are_seeded() {
        for p in [Pattern::Checker, Pattern::Rings, Pattern::Gradient, Pattern::Noise, Pattern::Mixed] {
            let img = p.render(33, 17, 5);
            assert!(img.min() >= 0.1 - 1e-12 && img.max() <= 0.9 + 1e-12, "{p:?}");
            assert_eq!(img, p.render(33, 17, 5));
        }
        assert_ne!(Pattern::Noise.render(8, 8, 1), Pattern::Noise.render(8, 8, 2));
        assert_eq!(Pattern::Constant(0.3).render(2, 2, 0).data(), &[0.3; 4]);
    }

    #[test]
    fn pattern_names() {
        assert_eq!("rings".parse::<Pattern>().unwrap(), Pattern::Rings);
        assert_eq!("constant:0.25".parse::<Pattern>().unwrap(), Pattern::Constant(0.25));
        assert!("constant:2".parse::<Pattern>().is_err());
        assert!("plaid".parse::<Pattern>().is_err());
    }

    #[test]
    fn standard_scene_builds() {
        let cam = table_camera(Point3::new(0.0, -0.2, 1.4), (16, 16), 0.4).unwrap();
        let s = tabletop_scene(5, 5, &ProjectorTemplate::default(), cam, vec![]).unwrap();
        assert_eq!(s.projectors.len(), 25);
        assert_eq!(s.reference_projector().id, 12);
    }
}
