use anyhow::{bail, Result};
use sapm_core::config::{RunConfig, TargetSource};
use sapm_core::io::{read_image, BitDepth};
use sapm_core::metrics::{psnr, ssim, Method, SsimWindow};
use sapm_core::solver::{solve_merged, solve_naive, uncompensated_input};
use sapm_core::transport::{apply_transport, build_registered_set, merge_transport, white_level};
use sapm_core::GrayImage;
use serde::Serialize;

use super::num;
use crate::Outputs;

#[derive(Serialize)]
struct Score {
    psnr: f64,
    /// Absent when the image is smaller than the SSIM window.
    ssim: Option<f64>,
}

#[derive(Serialize)]
struct Quality {
    compensated: Score,
    uncompensated: Score,
}

#[derive(Serialize)]
struct Report {
    method: String,
    projectors: usize,
    white_level: f64,
    gain: f64,
    iterations: usize,
    part_iterations: Vec<usize>,
    converged: bool,
    residual: f64,
    /// Fraction of solution pixels on a box bound.
    saturation: f64,
    quality: Quality,
}

fn score(reference: &GrayImage, img: &GrayImage) -> Result<Score> {
    Ok(Score {
        psnr: psnr(reference, img, 1.0)?,
        ssim: ssim(reference, img, SsimWindow::default()).ok(),
    })
}

/// Projector input(s), forward-model previews, residual history and a
/// report. Targets are fractions of the scene's white level.
pub fn compensate(cfg: &RunConfig) -> Result<Outputs> {
    let scene = &cfg.scene;
    let (w, h) = scene.camera.resolution;
    let opts = &cfg.compensate;
    let appearance = match &opts.target {
        TargetSource::Image(path) => {
            let img = read_image(path)?;
            if img.dims() != (w, h) {
                bail!(
                    "target {} is {}x{} but the camera is {w}x{h}",
                    path.display(),
                    img.width(),
                    img.height()
                );
            }
            img
        }
        TargetSource::Pattern(p) => p.render(w, h, cfg.seed),
    }
    .scaled(opts.gain);

    let parts = build_registered_set(scene, opts.include_occluders)?;
    let merged = merge_transport(&parts)?;
    let white = white_level(&merged)?;
    let target = appearance.scaled(white);
    let report = match opts.method {
        Method::Merged => solve_merged(&merged, &target, &cfg.solver)?,
        Method::Naive => solve_naive(&parts, &target, &cfg.solver)?,
    };
    let plain = apply_transport(&merged, &uncompensated_input(&merged, &target, cfg.solver.upper_bound)?)?;
    let preview = report.combined.scaled(1.0 / white);
    let plain = plain.scaled(1.0 / white);

    let mut out = Outputs::default();
    match opts.method {
        Method::Merged => out.png("input.png", &report.solutions[0], BitDepth::Sixteen)?,
        Method::Naive => {
            for (p, img) in scene.projectors.iter().zip(&report.solutions) {
                out.png(format!("input_{:02}.png", p.id), img, BitDepth::Sixteen)?;
            }
        }
    }
    out.png("preview.png", &preview, BitDepth::Sixteen)?;
    out.png("preview_uncompensated.png", &plain, BitDepth::Sixteen)?;
    match opts.method {
        Method::Merged => out.csv(
            "residual.csv",
            &["iteration", "residual", "seconds"],
            report.histories[0]
                .iter()
                .map(|r| [r.iteration.to_string(), num(r.residual), num(r.seconds)]),
        )?,
        Method::Naive => out.csv(
            "residual.csv",
            &["projector", "iteration", "residual", "seconds"],
            scene.projectors.iter().zip(&report.histories).flat_map(|(p, hist)| {
                hist.iter()
                    .map(move |r| [p.id.to_string(), r.iteration.to_string(), num(r.residual), num(r.seconds)])
            }),
        )?,
    }
    out.json(
        "report.json",
        &Report {
            method: opts.method.to_string(),
            projectors: scene.projectors.len(),
            white_level: white,
            gain: opts.gain,
            iterations: report.iterations,
            part_iterations: report.part_iterations.clone(),
            converged: report.converged,
            residual: report.residual,
            saturation: report.saturation,
            quality: Quality {
                compensated: score(&appearance, &preview)?,
                uncompensated: score(&appearance, &plain)?,
            },
        },
    )?;
    Ok(out)
}
