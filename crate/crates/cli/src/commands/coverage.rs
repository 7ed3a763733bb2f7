use anyhow::Result;
use sapm_core::io::{encode_png_levels, encode_rgb_png};
use sapm_core::occlusion::coverage_map;
use sapm_core::config::RunConfig;
use serde::Serialize;

use crate::Outputs;

/// 16-bit level written where the camera sees no surface.
const NO_SURFACE: u16 = u16::MAX;

/// Perceptually ordered ramp from dark blue through teal to yellow.
const RAMP: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

fn ramp(t: f64) -> [u8; 3] {
    let x = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (x.floor() as usize).min(RAMP.len() - 2);
    let f = x - i as f64;
    let mut c = [0u8; 3];
    for k in 0..3 {
        c[k] = (RAMP[i][k] + f * (RAMP[i + 1][k] - RAMP[i][k])).round() as u8;
    }
    c
}

fn color(count: u16, n: usize) -> [u8; 3] {
    ramp(if n == 0 { 0.0 } else { count as f64 / n as f64 })
}

#[derive(Serialize)]
struct Entry {
    count: u16,
    rgb: [u8; 3],
}

#[derive(Serialize)]
struct Legend {
    projectors: usize,
    png_encoding: &'static str,
    no_surface_level: u16,
    no_surface_rgb: [u8; 3],
    colors: Vec<Entry>,
    surface_pixels: usize,
    min_count: Option<u16>,
    max_count: Option<u16>,
    /// Sum of missing projectors over surface pixels.
    deficit: usize,
}

/// Raw counts as a 16-bit PNG, a pseudo-color PNG, a long-form CSV and a
/// legend describing both images.
pub fn coverage(cfg: &RunConfig) -> Result<Outputs> {
    let cov = coverage_map(&cfg.scene);
    let n = cov.projector_count;
    let levels = cov.counts.iter().map(|c| c.unwrap_or(NO_SURFACE)).collect();
    let rgb = cov
        .counts
        .iter()
        .flat_map(|c| c.map_or([0, 0, 0], |c| color(c, n)))
        .collect();
    let legend = Legend {
        projectors: n,
        png_encoding: "coverage.png stores the projector count per pixel",
        no_surface_level: NO_SURFACE,
        no_surface_rgb: [0, 0, 0],
        colors: (0..=n as u16).map(|c| Entry { count: c, rgb: color(c, n) }).collect(),
        surface_pixels: cov.counts.iter().flatten().count(),
        min_count: cov.counts.iter().flatten().min().copied(),
        max_count: cov.counts.iter().flatten().max().copied(),
        deficit: cov.deficit(),
    };

    let mut out = Outputs::default();
    out.add("coverage.png", encode_png_levels(cov.width, cov.height, levels)?);
    out.add("coverage_color.png", encode_rgb_png(cov.width, cov.height, rgb)?);
    out.csv(
        "coverage.csv",
        &["x", "y", "count"],
        (0..cov.width * cov.height).map(|i| {
            [
                (i % cov.width).to_string(),
                (i / cov.width).to_string(),
                cov.counts[i].map_or_else(String::new, |c| c.to_string()),
            ]
        }),
    )?;
    out.json("coverage_legend.json", &legend)?;
    Ok(out)
}
