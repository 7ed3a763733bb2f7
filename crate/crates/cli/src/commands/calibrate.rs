use anyhow::{bail, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sapm_core::calibration::{
    decode_correspondence, estimate_homography, estimate_projection_matrix, generate_graycode_patterns,
    homography_distance, plane_homography, plane_to_device, simulate_capture, synthetic_landmarks,
    true_correspondence, Homography,
};
use sapm_core::config::RunConfig;
use sapm_core::io::{encode_correspondence_png, format_matrix};
use nalgebra::DMatrix;
use sapm_core::scene::project_point;
use sapm_core::{Device, Point2, TargetSurface};
use serde::Serialize;

use crate::Outputs;

/// Plane landmarks per side of the camera calibration grid.
const GRID: usize = 7;

#[derive(Serialize)]
struct CameraCalibration {
    landmarks: usize,
    /// Normalized max-entry distance to the modeled homography.
    distance_to_truth: f64,
    max_reprojection_px: f64,
}

#[derive(Serialize)]
struct DecodedFit {
    pairs: usize,
    mean_fit_error_px: f64,
    /// Largest disagreement with the modeled homography over decoded pixels.
    max_transfer_error_px: f64,
}

#[derive(Serialize)]
struct ProjectorCalibration {
    id: u32,
    decoded_fraction: f64,
    /// Decoded pixels that name the projector pixel the camera ray truly hits.
    decode_accuracy: f64,
    decoded_homography: Option<DecodedFit>,
    landmarks: usize,
    projection_rms_px: f64,
    projection_max_error_px: f64,
    /// Camera-to-projector homography chained from the landmark fits.
    homography_distance_to_truth: f64,
    homography_max_transfer_px: f64,
}

#[derive(Serialize)]
struct Summary {
    seed: u64,
    noise: f64,
    margin: f64,
    camera: CameraCalibration,
    projectors: Vec<ProjectorCalibration>,
}

fn matrix_text(m: &nalgebra::Matrix3<f64>) -> String {
    format_matrix(&DMatrix::from_column_slice(3, 3, m.as_slice()))
}

fn max_transfer(a: &Homography, b: &Homography, pts: &[Point2<f64>]) -> f64 {
    pts.iter().map(|p| (a.apply(p) - b.apply(p)).norm()).fold(0.0, f64::max)
}

/// Gray-code correspondences per projector, plane-to-camera and
/// camera-to-projector homographies, projection matrices, and their errors
/// against the modeled devices.
pub fn calibrate(cfg: &RunConfig) -> Result<Outputs> {
    let scene = &cfg.scene;
    let TargetSurface::Plane(plane) = &scene.target else {
        bail!("calibrate needs a plane target");
    };
    let opts = &cfg.calibrate;
    let ids = if opts.projectors.is_empty() {
        scene.projector_ids()
    } else {
        opts.projectors.clone()
    };
    let cam = &scene.camera;
    let (w, h) = cam.resolution;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Outputs::default();

    // plane-to-camera from a grid of plane points spread over the camera view
    let w2c_truth = plane_to_device(cam, plane)?;
    let mut plane_pts = Vec::new();
    let mut cam_pts = Vec::new();
    for j in 0..GRID {
        for i in 0..GRID {
            let x = (0.05 + 0.9 * i as f64 / (GRID - 1) as f64) * (w - 1) as f64;
            let y = (0.05 + 0.9 * j as f64 / (GRID - 1) as f64) * (h - 1) as f64;
            let Some(hit) = scene.camera_surface_point(x.round() as usize, y.round() as usize) else {
                continue;
            };
            let d = hit.point - plane.origin;
            plane_pts.push(Point2::new(d.dot(&plane.axis_u), d.dot(&plane.axis_v)));
            cam_pts.push(project_point(cam, &hit.point)?);
        }
    }
    if plane_pts.len() < 4 {
        bail!("the camera sees fewer than 4 plane landmarks");
    }
    let w2c = estimate_homography(&plane_pts, &cam_pts)?.homography;
    let camera = CameraCalibration {
        landmarks: plane_pts.len(),
        distance_to_truth: homography_distance(&w2c, &w2c_truth),
        max_reprojection_px: max_transfer(&w2c, &w2c_truth, &plane_pts),
    };
    out.text("homography_w2c.txt", matrix_text(w2c.matrix()));
    out.text("homography_w2c_truth.txt", matrix_text(w2c_truth.matrix()));

    let pixel_centers: Vec<Point2<f64>> = (0..w * h)
        .map(|i| Point2::new((i % w) as f64 + 0.5, (i / w) as f64 + 0.5))
        .collect();
    let mut projectors = Vec::new();
    for id in ids {
        let proj = scene.projector(id).expect("validated projector id");
        let (pw, ph) = proj.resolution;
        let patterns = generate_graycode_patterns(pw, ph)?;
        let captured = simulate_capture(scene, id, &patterns, opts.noise, &mut rng)?;
        let map = decode_correspondence(&captured, pw, ph, opts.margin)?;
        let truth = true_correspondence(scene, id)?;
        let c2p_truth = w2c_truth.inverse()?.then(&plane_to_device(proj, plane)?)?;

        let mut lit = 0;
        let mut correct = 0;
        let mut src = Vec::new();
        let mut dst = Vec::new();
        for (i, (got, t)) in map.coords.iter().zip(&truth).enumerate() {
            if let Some((u, v)) = *got {
                src.push(pixel_centers[i]);
                dst.push(Point2::new(u as f64 + 0.5, v as f64 + 0.5));
                if let Some(t) = t {
                    lit += 1;
                    correct += (u == t.x.floor() as u32 && v == t.y.floor() as u32) as usize;
                }
            }
        }
        let decoded_homography = if src.len() >= 4 {
            let fit = estimate_homography(&src, &dst)?;
            out.text(format!("homography_c2p_{id:02}_decoded.txt"), matrix_text(fit.homography.matrix()));
            Some(DecodedFit {
                pairs: src.len(),
                mean_fit_error_px: fit.mean_error,
                max_transfer_error_px: max_transfer(&fit.homography, &c2p_truth, &src),
            })
        } else {
            None
        };

        let (world, image) = synthetic_landmarks(scene, id, opts.landmarks, &mut rng)?;
        let est = estimate_projection_matrix(&world, &image)?;
        let truth_p = proj.projection_matrix();
        let projection_max_error_px = world
            .iter()
            .zip(&image)
            .map(|(x, px)| (est.matrix.project(x) - px).norm())
            .fold(0.0, f64::max);
        let c2p = w2c.inverse()?.then(&plane_homography(est.matrix.matrix(), plane)?)?;
        let inside: Vec<Point2<f64>> = truth
            .iter()
            .zip(&pixel_centers)
            .filter(|(t, _)| t.is_some())
            .map(|(_, p)| *p)
            .collect();

        out.add(format!("correspondence_{id:02}.png"), encode_correspondence_png(w, h, &map.coords)?);
        if opts.export_csv {
            out.csv(
                format!("correspondence_{id:02}.csv"),
                &["x", "y", "u", "v"],
                map.coords.iter().enumerate().filter_map(|(i, c)| {
                    c.map(|(u, v)| [(i % w).to_string(), (i / w).to_string(), u.to_string(), v.to_string()])
                }),
            )?;
        }
        out.text(format!("homography_c2p_{id:02}.txt"), matrix_text(c2p.matrix()));
        out.text(format!("homography_c2p_{id:02}_truth.txt"), matrix_text(c2p_truth.matrix()));
        out.text(
            format!("projection_{id:02}.txt"),
            format_matrix(&DMatrix::from_column_slice(3, 4, est.matrix.matrix().as_slice())),
        );
        out.text(
            format!("projection_{id:02}_truth.txt"),
            format_matrix(&DMatrix::from_column_slice(3, 4, truth_p.as_slice())),
        );
        projectors.push(ProjectorCalibration {
            id,
            decoded_fraction: map.decoded_fraction(),
            decode_accuracy: if lit > 0 { correct as f64 / lit as f64 } else { 0.0 },
            decoded_homography,
            landmarks: world.len(),
            projection_rms_px: est.rms_error,
            projection_max_error_px,
            homography_distance_to_truth: homography_distance(&c2p, &c2p_truth),
            homography_max_transfer_px: max_transfer(&c2p, &c2p_truth, &inside),
        });
    }
    out.json(
        "calibration.json",
        &Summary {
            seed: cfg.seed,
            noise: opts.noise,
            margin: opts.margin,
            camera,
            projectors,
        },
    )?;
    Ok(out)
}
