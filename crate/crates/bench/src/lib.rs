//! Shared fixtures for the criterion benches.

use sapm_core::presets::{table_camera, tabletop_scene, Pattern};
use sapm_core::transport::{build_registered_set, merge_transport, white_level};
use sapm_core::{FocalSpec, GrayImage, LightTransport, Point3, ProjectorTemplate, Scene};

/// Tabletop with a `rows × rows` array and a square camera of side `camera`.
pub fn scene(rows: usize, camera: usize) -> Scene {
    let cam = table_camera(Point3::new(0.0, -0.1, 1.4), (camera, camera), 0.4).unwrap();
    let tpl = ProjectorTemplate {
        resolution: (camera * 3 / 2, camera * 3 / 2),
        focal: FocalSpec::FieldWidth(0.45),
        ..Default::default()
    };
    tabletop_scene(rows, rows, &tpl, cam, vec![]).unwrap()
}

pub struct Problem {
    pub parts: Vec<LightTransport>,
    pub merged: LightTransport,
    /// Mixed test pattern at the scene's white level.
    pub target: GrayImage,
}

pub fn problem(rows: usize, camera: usize) -> Problem {
    let parts = build_registered_set(&scene(rows, camera), false).unwrap();
    let merged = merge_transport(&parts).unwrap();
    let white = white_level(&merged).unwrap();
    let target = Pattern::Mixed.render(camera, camera, 7).scaled(white);
    Problem { parts, merged, target }
}
