use std::fmt::Write as _;

use anyhow::{anyhow, Result};
use sapm_core::config::RunConfig;
use sapm_core::metrics::{bench_scaling, subgrid_ids, BenchRecord, BenchSetup, Method};
use sapm_core::transport::build_registered_set;
use sapm_core::SolverConfig;

use super::num;
use crate::Outputs;

/// Merged and naive solve times for each sub-array size in the sweep, as
/// CSV plus an SVG chart with a log time axis.
pub fn bench(cfg: &RunConfig) -> Result<Outputs> {
    let grid = cfg
        .grid
        .ok_or_else(|| anyhow!("bench needs the projectors to come from an [array] table"))?;
    for &n in &cfg.bench.sweep {
        subgrid_ids(grid.0, grid.1, n)?;
    }
    let scene = &cfg.scene;
    let (w, h) = scene.camera.resolution;
    let setup = BenchSetup {
        parts: build_registered_set(scene, false)?,
        grid,
        pattern: cfg.bench.pattern.render(w, h, cfg.seed),
    };
    // fixed budget: only an exactly stationary residual stops early
    let solver = SolverConfig {
        max_iterations: cfg.bench.iterations,
        tolerance: f64::MIN_POSITIVE,
        ..cfg.solver
    };
    let records = bench_scaling(&setup, &cfg.bench.sweep, &solver, cfg.bench.runs)?;

    let mut out = Outputs::default();
    out.csv(
        "bench.csv",
        &["N", "method", "seconds", "iterations", "nnz", "psnr", "ssim"],
        records.iter().map(|r| {
            [
                r.n.to_string(),
                r.method.to_string(),
                num(r.seconds),
                r.iterations.to_string(),
                r.nnz.to_string(),
                num(r.psnr),
                num(r.ssim),
            ]
        }),
    )?;
    out.text("bench.svg", chart(&records));
    Ok(out)
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;

fn chart(records: &[BenchRecord]) -> String {
    let times: Vec<f64> = records.iter().map(|r| r.seconds.max(1e-9)).collect();
    let lo = times.iter().copied().fold(f64::INFINITY, f64::min).log10().floor();
    let hi = times.iter().copied().fold(0.0, f64::max).log10().ceil().max(lo + 1.0);
    let n_max = records.iter().map(|r| r.n).max().unwrap_or(1).max(1) as f64;
    let x = |n: usize| MARGIN + (W - 2.0 * MARGIN) * n as f64 / n_max;
    let y = |s: f64| H - MARGIN - (H - 2.0 * MARGIN) * (s.max(1e-9).log10() - lo) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for e in lo as i32..=hi as i32 {
        let ty = y(10f64.powi(e));
        let _ = writeln!(svg, r##"<line x1="{x0}" y1="{ty:.1}" x2="{x1}" y2="{ty:.1}" stroke="#ddd"/>"##);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{e}</text>"#,
            x0 - 6.0,
            ty + 4.0
        );
    }
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.dedup();
    for &n in &ns {
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{n}</text>"#, x(n), y0 + 18.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">projectors N</text>"#, W / 2.0, H - 15.0);
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{:.1}" transform="rotate(-90 15 {:.1})" text-anchor="middle">solve time (s)</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (k, (method, colour)) in [(Method::Merged, "#1f77b4"), (Method::Naive, "#d62728")].into_iter().enumerate() {
        let pts: Vec<String> = records
            .iter()
            .filter(|r| r.method == method)
            .map(|r| format!("{:.1},{:.1}", x(r.n), y(r.seconds)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        for p in &pts {
            let (cx, cy) = p.split_once(',').unwrap();
            let _ = writeln!(svg, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{colour}"/>"#);
        }
        let ly = MARGIN + 18.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"/>"#,
            x1 - 110.0,
            x1 - 90.0
        );
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{method}</text>"#, x1 - 84.0, ly + 4.0);
    }
    svg.push_str("</svg>\n");
    svg
}
