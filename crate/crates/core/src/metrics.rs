//! Image-quality metrics and the merged-vs-naive scaling benchmark.

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::solver::{solve_merged, solve_naive, SolverConfig, SolverReport};
use crate::transport::{merge_transport, white_level, LightTransport};

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical images.
pub fn psnr(a: &GrayImage, b: &GrayImage, peak: f64) -> Result<f64> {
    a.same_dims(b)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SsimWindow {
    /// `size × size` Gaussian weights, every fully contained position.
    Gaussian { size: usize, sigma: f64 },
    /// Non-overlapping `size × size` uniform blocks.
    Block { size: usize },
}

impl Default for SsimWindow {
    fn default() -> Self {
        SsimWindow::Gaussian { size: 11, sigma: 1.5 }
    }
}

impl SsimWindow {
    fn size(&self) -> usize {
        match *self {
            SsimWindow::Gaussian { size, .. } | SsimWindow::Block { size } => size,
        }
    }

    fn weights(&self) -> Vec<f64> {
        let n = self.size();
        let w: Vec<f64> = match *self {
            SsimWindow::Gaussian { sigma, .. } => {
                let c = (n as f64 - 1.0) / 2.0;
                let g: Vec<f64> = (0..n).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
                (0..n * n).map(|k| g[k / n] * g[k % n]).collect()
            }
            SsimWindow::Block { .. } => vec![1.0; n * n],
        };
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    }

    fn positions(&self, w: usize, h: usize) -> Vec<(usize, usize)> {
        let n = self.size();
        let step = match self {
            SsimWindow::Gaussian { .. } => 1,
            SsimWindow::Block { .. } => n,
        };
        let mut out = Vec::new();
        let mut y = 0;
        while y + n <= h {
            let mut x = 0;
            while x + n <= w {
                out.push((x, y));
                x += step;
            }
            y += step;
        }
        out
    }
}

/// Mean structural similarity with `C1 = (0.01·peak)²`, `C2 = (0.03·peak)²`
/// at unit peak.
pub fn ssim(a: &GrayImage, b: &GrayImage, window: SsimWindow) -> Result<f64> {
    a.same_dims(b)?;
    let n = window.size();
    let (w, h) = a.dims();
    if n == 0 || w < n || h < n {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            window: n,
        });
    }
    const C1: f64 = 0.01 * 0.01;
    const C2: f64 = 0.03 * 0.03;
    let wts = window.weights();
    let positions = window.positions(w, h);
    let mut total = 0.0;
    for &(x0, y0) in &positions {
        let (mut ma, mut mb) = (0.0, 0.0);
        for dy in 0..n {
            for dx in 0..n {
                let k = wts[dy * n + dx];
                ma += k * a.get(x0 + dx, y0 + dy);
                mb += k * b.get(x0 + dx, y0 + dy);
            }
        }
        let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
        for dy in 0..n {
            for dx in 0..n {
                let k = wts[dy * n + dx];
                let da = a.get(x0 + dx, y0 + dy) - ma;
                let db = b.get(x0 + dx, y0 + dy) - mb;
                va += k * da * da;
                vb += k * db * db;
                cov += k * da * db;
            }
        }
        total += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
    }
    Ok(total / positions.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityScore {
    pub psnr: f64,
    pub ssim: f64,
    pub reference: String,
    pub candidate: String,
}

/// PSNR (peak 1) and default-window SSIM of `candidate` against `reference`.
pub fn quality(
    reference: &GrayImage,
    candidate: &GrayImage,
    reference_id: &str,
    candidate_id: &str,
) -> Result<QualityScore> {
    Ok(QualityScore {
        psnr: psnr(reference, candidate, 1.0)?,
        ssim: ssim(reference, candidate, SsimWindow::default())?,
        reference: reference_id.to_owned(),
        candidate: candidate_id.to_owned(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Merged,
    Naive,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Merged => "merged",
            Method::Naive => "naive",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "merged" => Ok(Method::Merged),
            "naive" => Ok(Method::Naive),
            _ => Err(Error::Parse(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub n: usize,
    pub method: Method,
    /// Median wall time over the runs.
    pub seconds: f64,
    pub iterations: usize,
    /// Non-zeros of the matrix (or matrices) the method iterates on.
    pub nnz: usize,
    pub psnr: f64,
    pub ssim: f64,
}

/// Row-major ids of the centered `k × k` block of a `rows × cols` array,
/// `k = √n`. For even `k` the block sits toward the first row and column.
pub fn subgrid_ids(rows: usize, cols: usize, n: usize) -> Result<Vec<usize>> {
    let k = (n as f64).sqrt().round() as usize;
    if k == 0 || k * k != n || k > rows || k > cols {
        return Err(Error::InvalidArgument(format!(
            "{n} projectors is not a square sub-grid of a {rows}x{cols} array"
        )));
    }
    let r0 = (rows - k) / 2;
    let c0 = (cols - k) / 2;
    Ok((r0..r0 + k)
        .flat_map(|r| (c0..c0 + k).map(move |c| r * cols + c))
        .collect())
}

/// Inputs shared by every point of a scaling sweep.
#[derive(Clone, Debug)]
pub struct BenchSetup {
    /// Registered transports of the full array, row-major.
    pub parts: Vec<LightTransport>,
    pub grid: (usize, usize),
    /// Target appearance in [0, 1]; for each `N` the solve target is this
    /// image times the white level of the `N`-projector merge.
    pub pattern: GrayImage,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn timed(runs: usize, mut f: impl FnMut() -> Result<SolverReport>) -> Result<(SolverReport, f64)> {
    let mut times = Vec::with_capacity(runs);
    let mut last = None;
    for _ in 0..runs.max(1) {
        let rep = f()?;
        times.push(rep.seconds);
        last = Some(rep);
    }
    Ok((last.unwrap(), median(times)))
}

/// Runs the merged and naive solvers for each `N` in `sweep` on the same
/// target appearance, single-threaded, reporting the median of `runs`
/// timings. PSNR and SSIM compare white-normalized images.
pub fn bench_scaling(setup: &BenchSetup, sweep: &[usize], cfg: &SolverConfig, runs: usize) -> Result<Vec<BenchRecord>> {
    let cfg = SolverConfig {
        parallel: false,
        record_history: false,
        ..*cfg
    };
    if setup.parts.len() != setup.grid.0 * setup.grid.1 {
        return Err(Error::InvalidArgument("transport count does not match the grid".into()));
    }
    let mut out = Vec::with_capacity(sweep.len() * 2);
    for &n in sweep {
        let parts: Vec<LightTransport> = subgrid_ids(setup.grid.0, setup.grid.1, n)?
            .into_iter()
            .map(|i| setup.parts[i].clone())
            .collect();
        // merging is precomputed once per configuration, outside the timed solve
        let merged = merge_transport(&parts)?;
        let white = white_level(&merged)?;
        let target = setup.pattern.scaled(white);
        let score = |img: &GrayImage| -> Result<(f64, f64)> {
            let img = img.scaled(1.0 / white);
            Ok((psnr(&setup.pattern, &img, 1.0)?, ssim(&setup.pattern, &img, SsimWindow::default())?))
        };
        let (rep, seconds) = timed(runs, || solve_merged(&merged, &target, &cfg))?;
        let (p, s) = score(&rep.combined)?;
        out.push(BenchRecord {
            n,
            method: Method::Merged,
            seconds,
            iterations: rep.iterations,
            nnz: merged.nnz(),
            psnr: p,
            ssim: s,
        });
        let (rep, seconds) = timed(runs, || solve_naive(&parts, &target, &cfg))?;
        let (p, s) = score(&rep.combined)?;
        out.push(BenchRecord {
            n,
            method: Method::Naive,
            seconds,
            iterations: rep.iterations,
            nnz: parts.iter().map(|p| p.nnz()).sum(),
            psnr: p,
            ssim: s,
        });
    }
    Ok(out)
}
