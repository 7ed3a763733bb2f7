//! TOML run configuration: scene description plus per-command sections.
//!
//! ```toml
//! seed = 7
//! radiometry = "inverse-square-cosine"   # or "uniform"
//!
//! [camera]
//! position = [0.0, -0.3, 1.4]
//! look_at = [0.0, 0.0, 0.0]
//! up = [0.0, 1.0, 0.0]
//! resolution = [128, 128]
//! field_width = 0.4                      # or focal = [fx, fy]
//!
//! [target]
//! kind = "plane"                         # or kind = "mesh", path = "bust.obj"
//! origin = [0.0, 0.0, 0.0]
//! axis_u = [1.0, 0.0, 0.0]
//! axis_v = [0.0, 1.0, 0.0]
//! extent = [1.2, 0.6]
//!
//! [array]                                # or one [[projector]] table per device
//! rows = 5
//! cols = 5
//! spacing = 0.3
//! height = 1.4
//!
//! [[occluder]]
//! kind = "capsule"
//! a = [0.0, 0.0, 0.0]
//! b = [0.0, 0.1, 0.15]
//! radius = 0.01
//!
//! [compensate]
//! pattern = "mixed"                      # or target = "photo.png"
//! gain = 0.8
//! method = "merged"                      # or "naive"
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use nalgebra::{Point3, Vector3};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io::read_obj;
use crate::metrics::Method;
use crate::occlusion::DEFAULT_SHADOW_THRESHOLD;
use crate::presets::Pattern;
use crate::scene::{
    make_grid_array, ArrayOrientation, CameraModel, FocalSpec, Intrinsics, Occluder, PlaneTarget, Pose,
    ProjectorModel, ProjectorTemplate, Radiometry, Scene, TargetSurface,
};
use crate::solver::{SolverConfig, StepRule};

/// Seed used when neither the config nor the command line sets one.
pub const DEFAULT_SEED: u64 = 20_240_601;

type V3 = [f64; 3];

fn p3(v: V3) -> Point3<f64> {
    Point3::new(v[0], v[1], v[2])
}

fn v3(v: V3) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

fn default_up() -> V3 {
    [0.0, 1.0, 0.0]
}

fn default_gamma() -> f64 {
    2.2
}

fn default_max_output() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum RadiometryName {
    InverseSquareCosine,
    Uniform,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraSection {
    position: V3,
    #[serde(default)]
    look_at: V3,
    #[serde(default = "default_up")]
    up: V3,
    resolution: [usize; 2],
    focal: Option<[f64; 2]>,
    field_width: Option<f64>,
}

fn focal_spec(focal: Option<[f64; 2]>, field_width: Option<f64>, what: &str) -> Result<FocalSpec> {
    match (focal, field_width) {
        (Some([fx, fy]), None) => Ok(FocalSpec::Pixels { fx, fy }),
        (None, Some(w)) => Ok(FocalSpec::FieldWidth(w)),
        (None, None) => Err(Error::InvalidScene(format!("{what}: set either focal or field_width"))),
        (Some(_), Some(_)) => Err(Error::InvalidScene(format!("{what}: focal and field_width are exclusive"))),
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum TargetSection {
    Plane {
        #[serde(default)]
        origin: V3,
        axis_u: V3,
        axis_v: V3,
        extent: [f64; 2],
    },
    Mesh {
        path: PathBuf,
    },
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OrientationName {
    Converging,
    Parallel,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArraySection {
    rows: usize,
    cols: usize,
    spacing: f64,
    height: f64,
    orientation: Option<OrientationName>,
    resolution: Option<[usize; 2]>,
    focal: Option<[f64; 2]>,
    field_width: Option<f64>,
    #[serde(default = "default_max_output")]
    max_output: f64,
    #[serde(default = "default_gamma")]
    gamma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectorSection {
    id: Option<u32>,
    position: V3,
    #[serde(default)]
    look_at: V3,
    #[serde(default = "default_up")]
    up: V3,
    resolution: [usize; 2],
    focal: Option<[f64; 2]>,
    field_width: Option<f64>,
    /// Principal point; defaults to the image center.
    principal: Option<[f64; 2]>,
    #[serde(default = "default_max_output")]
    max_output: f64,
    #[serde(default = "default_gamma")]
    gamma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum OccluderSection {
    Sphere { center: V3, radius: f64 },
    Capsule { a: V3, b: V3, radius: f64 },
    Mesh { path: PathBuf },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum StepSpec {
    Named(String),
    Fixed(f64),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    max_iterations: Option<usize>,
    tolerance: Option<f64>,
    upper_bound: Option<f64>,
    step: Option<StepSpec>,
    parallel: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OcclusionSection {
    threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateSection {
    input: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompensateSection {
    target: Option<PathBuf>,
    pattern: Option<String>,
    gain: Option<f64>,
    include_occluders: Option<bool>,
    method: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrateSection {
    projectors: Option<Vec<u32>>,
    noise: Option<f64>,
    margin: Option<f64>,
    landmarks: Option<usize>,
    export_csv: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchSection {
    sweep: Option<Vec<usize>>,
    iterations: Option<usize>,
    runs: Option<usize>,
    pattern: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    radiometry: Option<RadiometryName>,
    camera: CameraSection,
    target: TargetSection,
    array: Option<ArraySection>,
    #[serde(default, rename = "projector")]
    projectors: Vec<ProjectorSection>,
    #[serde(default, rename = "occluder")]
    occluders: Vec<OccluderSection>,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    occlusion: OcclusionSection,
    #[serde(default)]
    simulate: SimulateSection,
    #[serde(default)]
    compensate: CompensateSection,
    #[serde(default)]
    calibrate: CalibrateSection,
    #[serde(default)]
    bench: BenchSection,
}

/// Where the compensation target comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetSource {
    Image(PathBuf),
    Pattern(Pattern),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateOptions {
    /// Uniform input level shown by every projector.
    pub input: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompensateOptions {
    /// Appearance in [0, 1] relative to the scene's white level.
    pub target: TargetSource,
    /// Multiplier applied to the target before solving.
    pub gain: f64,
    pub include_occluders: bool,
    pub method: Method,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrateOptions {
    /// Projectors to calibrate; empty means all.
    pub projectors: Vec<u32>,
    /// Gaussian noise σ added to captured pattern images.
    pub noise: f64,
    pub margin: f64,
    /// Synthetic landmark count for projection-matrix estimation.
    pub landmarks: usize,
    pub export_csv: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchOptions {
    pub sweep: Vec<usize>,
    /// Fixed iteration budget per solve.
    pub iterations: usize,
    pub runs: usize,
    pub pattern: Pattern,
}

/// Fully resolved, validated configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub path: PathBuf,
    /// Raw config text, kept for hashing.
    pub text: String,
    pub seed: u64,
    pub scene: Scene,
    /// `(rows, cols)` when the projectors came from an `[array]` table.
    pub grid: Option<(usize, usize)>,
    pub solver: SolverConfig,
    pub threshold: f64,
    pub simulate: SimulateOptions,
    pub compensate: CompensateOptions,
    pub calibrate: CalibrateOptions,
    pub bench: BenchOptions,
}

fn resolve(base: &Path, p: &Path) -> Result<PathBuf> {
    let full = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    if !full.is_file() {
        return Err(Error::InvalidScene(format!("referenced file {} does not exist", full.display())));
    }
    Ok(full)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base, path)
    }

    /// Parses `text`, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path, path: &Path) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let radiometry = match file.radiometry {
            None | Some(RadiometryName::InverseSquareCosine) => Radiometry::InverseSquareCosine,
            Some(RadiometryName::Uniform) => Radiometry::Uniform,
        };

        let target = match file.target {
            TargetSection::Plane {
                origin,
                axis_u,
                axis_v,
                extent,
            } => TargetSurface::Plane(PlaneTarget::new(p3(origin), v3(axis_u), v3(axis_v), (extent[0], extent[1]))?),
            TargetSection::Mesh { path } => TargetSurface::Mesh(read_obj(&resolve(base, &path)?)?),
        };

        let c = file.camera;
        let camera = CameraModel::look_at(
            p3(c.position),
            p3(c.look_at),
            v3(c.up),
            (c.resolution[0], c.resolution[1]),
            focal_spec(c.focal, c.field_width, "camera")?,
        )?;

        let mut projectors = Vec::new();
        let mut grid = None;
        if let Some(a) = file.array {
            let template = ProjectorTemplate {
                resolution: a.resolution.map_or(ProjectorTemplate::default().resolution, |r| (r[0], r[1])),
                focal: match (a.focal, a.field_width) {
                    (None, None) => ProjectorTemplate::default().focal,
                    (f, w) => focal_spec(f, w, "array")?,
                },
                max_output: a.max_output,
                response_gamma: a.gamma,
                orientation: match a.orientation {
                    None | Some(OrientationName::Converging) => ArrayOrientation::Converging,
                    Some(OrientationName::Parallel) => ArrayOrientation::Parallel,
                },
            };
            projectors = make_grid_array(a.rows, a.cols, a.spacing, a.height, &target, &template)?;
            grid = Some((a.rows, a.cols));
        }
        let first_free = projectors.len() as u32;
        for (k, p) in file.projectors.into_iter().enumerate() {
            let resolution = (p.resolution[0], p.resolution[1]);
            let eye = p3(p.position);
            let aim = p3(p.look_at);
            let (fx, fy) = focal_spec(p.focal, p.field_width, "projector")?.focal(resolution.0, (aim - eye).norm());
            let mut intrinsics = Intrinsics::centered(fx, fy, resolution);
            if let Some([cx, cy]) = p.principal {
                intrinsics.cx = cx;
                intrinsics.cy = cy;
            }
            projectors.push(ProjectorModel {
                id: p.id.unwrap_or(first_free + k as u32),
                pose: Pose::look_at(eye, aim, v3(p.up))?,
                intrinsics,
                resolution,
                max_output: p.max_output,
                response_gamma: p.gamma,
            });
        }
        if grid.is_some() && projectors.len() != grid.map_or(0, |(r, c)| r * c) {
            grid = None;
        }

        let occluders = file
            .occluders
            .into_iter()
            .map(|o| {
                Ok(match o {
                    OccluderSection::Sphere { center, radius } => Occluder::Sphere {
                        center: p3(center),
                        radius,
                    },
                    OccluderSection::Capsule { a, b, radius } => Occluder::Capsule {
                        a: p3(a),
                        b: p3(b),
                        radius,
                    },
                    OccluderSection::Mesh { path } => Occluder::Mesh(read_obj(&resolve(base, &path)?)?),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let scene = Scene::new(projectors, target, camera, occluders)?.with_radiometry(radiometry);

        let defaults = SolverConfig::default();
        let s = file.solver;
        let solver = SolverConfig {
            max_iterations: s.max_iterations.unwrap_or(defaults.max_iterations),
            tolerance: s.tolerance.unwrap_or(defaults.tolerance),
            upper_bound: s.upper_bound.unwrap_or_else(|| scene.min_max_output()),
            step: match s.step {
                None => StepRule::ExactLineSearch,
                Some(StepSpec::Named(n)) if n == "exact" => StepRule::ExactLineSearch,
                Some(StepSpec::Named(n)) => return Err(Error::Parse(format!("unknown solver step {n:?}"))),
                Some(StepSpec::Fixed(a)) => StepRule::Fixed(a),
            },
            record_history: true,
            parallel: s.parallel.unwrap_or(defaults.parallel),
        };
        solver.validate()?;

        let threshold = file.occlusion.threshold.unwrap_or(DEFAULT_SHADOW_THRESHOLD);
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidArgument(format!("shadow threshold {threshold} must lie in (0, 1)")));
        }

        let input = file.simulate.input.unwrap_or(1.0);
        if !(input > 0.0 && input <= 1.0) {
            return Err(Error::InvalidArgument(format!("simulate input {input} must lie in (0, 1]")));
        }

        let cs = file.compensate;
        let target_source = match (cs.target, cs.pattern) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidArgument("compensate: target and pattern are exclusive".into()))
            }
            (Some(p), None) => TargetSource::Image(resolve(base, &p)?),
            (None, Some(name)) => TargetSource::Pattern(name.parse()?),
            (None, None) => TargetSource::Pattern(Pattern::default()),
        };
        let gain = cs.gain.unwrap_or(1.0);
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::InvalidArgument(format!("compensate gain {gain} must be positive")));
        }

        let method = match cs.method {
            Some(m) => m.parse()?,
            None => Method::Merged,
        };

        let cal = file.calibrate;
        let calibrate = CalibrateOptions {
            projectors: cal.projectors.unwrap_or_default(),
            noise: cal.noise.unwrap_or(0.0),
            margin: cal.margin.unwrap_or(0.1),
            landmarks: cal.landmarks.unwrap_or(20),
            export_csv: cal.export_csv.unwrap_or(false),
        };
        if let Some(id) = calibrate.projectors.iter().find(|&&id| scene.projector(id).is_none()) {
            return Err(Error::InvalidArgument(format!("calibrate: unknown projector {id}")));
        }
        if !(calibrate.noise >= 0.0) || !(0.0..0.5).contains(&calibrate.margin) {
            return Err(Error::InvalidArgument("calibrate: noise must be ≥ 0 and margin in [0, 0.5)".into()));
        }
        if calibrate.landmarks < 6 {
            return Err(Error::TooFewPoints {
                required: 6,
                actual: calibrate.landmarks,
            });
        }

        let b = file.bench;
        let bench = BenchOptions {
            sweep: b.sweep.unwrap_or_else(|| vec![1, 4, 9, 16, 25]),
            iterations: b.iterations.unwrap_or(50),
            runs: b.runs.unwrap_or(3),
            pattern: match b.pattern {
                Some(n) => n.parse()?,
                None => Pattern::default(),
            },
        };
        if bench.sweep.is_empty() || bench.iterations == 0 || bench.runs == 0 {
            return Err(Error::InvalidArgument("bench: sweep, iterations and runs must be non-empty".into()));
        }

        Ok(RunConfig {
            path: path.to_path_buf(),
            text: text.to_owned(),
            seed: file.seed.unwrap_or(DEFAULT_SEED),
            scene,
            grid,
            solver,
            threshold,
            simulate: SimulateOptions { input },
            compensate: CompensateOptions {
                target: target_source,
                gain,
                include_occluders: cs.include_occluders.unwrap_or(false),
                method,
            },
            calibrate,
            bench,
        })
    }
}
