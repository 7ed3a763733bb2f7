//! Simulation, calibration and compensation for dense arrays of
//! overlapping projectors lighting a shared surface.

// `!(x > 0.0)` deliberately rejects NaN alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod calibration;
pub mod config;
pub mod error;
pub mod geometry;
pub mod image;
pub mod io;
pub mod metrics;
pub mod occlusion;
pub mod presets;
pub mod scene;
pub mod solver;
pub mod transport;

pub use crate::error::{Error, Result};
pub use crate::image::GrayImage;
pub use crate::scene::{
    ArrayOrientation, CameraModel, Device, FocalSpec, Intrinsics, Occluder, PlaneTarget, Pose, ProjectorModel,
    ProjectorTemplate, Radiometry, Scene, TargetSurface, TriangleMesh,
};
pub use crate::solver::{SolverConfig, SolverReport, StepRule};
pub use crate::transport::{LightTransport, Provenance};

pub use nalgebra::{Point2, Point3, Vector3};
