use anyhow::Result;
use sapm_core::config::RunConfig;
use sapm_core::io::BitDepth;
use sapm_core::occlusion::{shadow_report, Undefined};
use sapm_core::transport::{apply_transport, build_registered_set, merge_transport};
use sapm_core::GrayImage;
use serde::Serialize;

use crate::Outputs;

#[derive(Serialize)]
struct UndefinedCounts {
    no_surface: usize,
    view_blocked: usize,
    unlit: usize,
}

#[derive(Serialize)]
struct ShadowSummary {
    projectors: usize,
    occluders: usize,
    input: f64,
    threshold: f64,
    min_illuminance: Option<f64>,
    shadow_pixels: usize,
    shadow_area_m2: f64,
    defined_pixels: usize,
    undefined: UndefinedCounts,
}

/// Free and occluded renders of a uniform input, relative illuminance,
/// shadow mask and a JSON summary.
pub fn simulate(cfg: &RunConfig) -> Result<Outputs> {
    let scene = &cfg.scene;
    let (w, h) = scene.camera.resolution;
    let free = merge_transport(&build_registered_set(scene, false)?)?;
    let occluded = merge_transport(&build_registered_set(scene, true)?)?;
    let p = GrayImage::filled(w, h, cfg.simulate.input);
    let report = shadow_report(scene, &free, &occluded, &p, cfg.threshold)?;

    let lit = apply_transport(&free, &p)?;
    let shaded = apply_transport(&occluded, &p)?;
    let peak = lit.max();
    let norm = if peak > 0.0 { 1.0 / peak } else { 1.0 };

    let count = |u: Undefined| report.undefined.iter().filter(|&&x| x == Some(u)).count();
    let summary = ShadowSummary {
        projectors: scene.projectors.len(),
        occluders: scene.occluders.len(),
        input: cfg.simulate.input,
        threshold: report.threshold,
        min_illuminance: report.min_illuminance,
        shadow_pixels: report.shadow_pixels,
        shadow_area_m2: report.shadow_area_m2,
        defined_pixels: report.defined_pixels,
        undefined: UndefinedCounts {
            no_surface: count(Undefined::NoSurface),
            view_blocked: count(Undefined::ViewBlocked),
            unlit: count(Undefined::Unlit),
        },
    };
    let mask = GrayImage::new(w, h, report.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect())?;

    let mut out = Outputs::default();
    out.png("render_free.png", &lit.scaled(norm), BitDepth::Sixteen)?;
    out.png("render_occluded.png", &shaded.scaled(norm), BitDepth::Sixteen)?;
    out.png("illuminance.png", &report.illuminance, BitDepth::Sixteen)?;
    out.png("shadow_mask.png", &mask, BitDepth::Eight)?;
    out.json("shadow.json", &summary)?;
    Ok(out)
}
