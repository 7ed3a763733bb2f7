//! Box-constrained blur compensation by projected steepest descent.
//!
//! Both entry points minimize `½‖L p − c′‖²` subject to `0 ≤ p ≤ upper_bound`.
//! [`solve_merged`] runs one descent against the summed transport;
//! [`solve_naive`] runs one per projector against `c′ / N`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::transport::{apply_sum, LightTransport};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    /// `α = ‖g‖² / ‖L g‖²` along the projected gradient, halved if the
    /// clamped step would raise the residual.
    ExactLineSearch,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once the relative residual change drops below this.
    pub tolerance: f64,
    /// Box ceiling; the floor is always 0.
    pub upper_bound: f64,
    pub step: StepRule,
    pub record_history: bool,
    /// Evaluate matrix–vector products across rows with rayon.
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-6,
            upper_bound: 1.0,
            step: StepRule::ExactLineSearch,
            record_history: true,
            parallel: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidArgument("max_iterations must be ≥ 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if !(self.upper_bound > 0.0) {
            return Err(Error::InvalidArgument("upper bound must be positive".into()));
        }
        if let StepRule::Fixed(a) = self.step {
            if !(a > 0.0) {
                return Err(Error::InvalidArgument("fixed step must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `‖L p − c′‖₂` after this iteration (iteration 0 is the warm start).
    pub residual: f64,
    /// Elapsed since the solve started.
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct SolverReport {
    /// One image for the merged solve, one per projector for the naive solve.
    pub solutions: Vec<GrayImage>,
    /// Forward-modeled camera image `Σ L_i p_i`.
    pub combined: GrayImage,
    /// Total iterations (summed over projectors for the naive solve).
    pub iterations: usize,
    pub part_iterations: Vec<usize>,
    /// `‖Σ L_i p_i − c′‖₂`.
    pub residual: f64,
    pub histories: Vec<Vec<IterationRecord>>,
    pub seconds: f64,
    /// Fraction of solution pixels sitting on either box bound.
    pub saturation: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Operator<'a> {
    l: &'a LightTransport,
    lt: LightTransport,
    parallel: bool,
}

impl<'a> Operator<'a> {
    fn new(l: &'a LightTransport, parallel: bool) -> Self {
        Self {
            l,
            lt: l.transpose(),
            parallel,
        }
    }

    fn forward(&self, x: &[f64], y: &mut [f64]) {
        if self.parallel {
            self.l.par_mul_vec_into(x, y)
        } else {
            self.l.mul_vec_into(x, y)
        }
    }

    fn adjoint(&self, x: &[f64], y: &mut [f64]) {
        if self.parallel {
            self.lt.par_mul_vec_into(x, y)
        } else {
            self.lt.mul_vec_into(x, y)
        }
    }
}

struct Outcome {
    p: Vec<f64>,
    iterations: usize,
    history: Vec<IterationRecord>,
    converged: bool,
}

fn check_target(l: &LightTransport, target: &GrayImage) -> Result<()> {
    if target.dims() != l.out_dims() {
        return Err(Error::ShapeMismatch(format!(
            "target {:?} does not match transport output {:?}",
            target.dims(),
            l.out_dims()
        )));
    }
    if l.nnz() == 0 {
        return Err(Error::Unsolvable("transport matrix is empty".into()));
    }
    Ok(())
}

fn descend(l: &LightTransport, target: &[f64], cfg: &SolverConfig, start: Instant) -> Result<Outcome> {
    let op = Operator::new(l, cfg.parallel);
    let upper = cfg.upper_bound;
    let n = l.cols();
    let m = l.rows();

    // warm start: target brightness-matched into the box
    let mut lc = vec![0.0; m];
    let seed: Vec<f64> = if l.in_dims() == l.out_dims() {
        target.to_vec()
    } else {
        vec![1.0; n]
    };
    op.forward(&seed, &mut lc);
    let mean_lc = lc.iter().sum::<f64>() / m as f64;
    if !(mean_lc > 0.0) {
        return Err(Error::Unsolvable("transport maps the warm start to a black image".into()));
    }
    let scale = target.iter().sum::<f64>() / m as f64 / mean_lc;
    let mut p: Vec<f64> = seed.iter().map(|v| (v * scale).clamp(0.0, upper)).collect();

    let mut r = vec![0.0; m];
    op.forward(&p, &mut r);
    r.iter_mut().zip(target).for_each(|(ri, ci)| *ri -= ci);
    let mut res = norm(&r);

    let mut history = Vec::new();
    if cfg.record_history {
        history.push(IterationRecord {
            iteration: 0,
            residual: res,
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    let mut g = vec![0.0; n];
    let mut lg = vec![0.0; m];
    let mut p_new = vec![0.0; n];
    let mut r_new = vec![0.0; m];
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=cfg.max_iterations {
        iterations = k;
        op.adjoint(&r, &mut g);
        // zero components that would push past an active bound
        for (gi, &pi) in g.iter_mut().zip(&p) {
            if (pi <= 0.0 && *gi > 0.0) || (pi >= upper && *gi < 0.0) {
                *gi = 0.0;
            }
        }
        let gg = dot(&g, &g);
        if gg == 0.0 {
            converged = true;
            break;
        }
        op.forward(&g, &mut lg);
        let curvature = dot(&lg, &lg);
        if curvature == 0.0 {
            converged = true;
            break;
        }
        let mut alpha = match cfg.step {
            StepRule::ExactLineSearch => gg / curvature,
            StepRule::Fixed(a) => a,
        };

        let mut accepted = false;
        for _ in 0..60 {
            let mut clamped = false;
            for ((pn, &pi), &gi) in p_new.iter_mut().zip(&p).zip(&g) {
                let raw = pi - alpha * gi;
                let c = raw.clamp(0.0, upper);
                clamped |= c != raw;
                *pn = c;
            }
            if clamped {
                op.forward(&p_new, &mut r_new);
                r_new.iter_mut().zip(target).for_each(|(ri, ci)| *ri -= ci);
            } else {
                // unclamped step: update the residual along L g
                r_new.iter_mut().zip(&r).zip(&lg).for_each(|((rn, ri), lgi)| *rn = ri - alpha * lgi);
            }
            let res_new = norm(&r_new);
            if matches!(cfg.step, StepRule::Fixed(_)) || res_new <= res {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // no descent along the projected direction: stationary within round-off
            converged = true;
            break;
        }
        std::mem::swap(&mut p, &mut p_new);
        std::mem::swap(&mut r, &mut r_new);
        let res_new = norm(&r);
        let change = (res - res_new).abs() / res.max(f64::MIN_POSITIVE);
        res = res_new;
        if cfg.record_history {
            history.push(IterationRecord {
                iteration: k,
                residual: res,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        if res == 0.0 || change < cfg.tolerance {
            converged = true;
            break;
        }
    }

    Ok(Outcome {
        p,
        iterations,
        history,
        converged,
    })
}

fn saturation(solutions: &[GrayImage], upper: f64) -> f64 {
    let total: usize = solutions.iter().map(|s| s.len()).sum();
    let at_bound = solutions
        .iter()
        .flat_map(|s| s.data())
        .filter(|&&v| v <= 0.0 || v >= upper)
        .count();
    at_bound as f64 / total as f64
}

/// Single descent against the summed transport; one image drives every
/// projector.
pub fn solve_merged(l: &LightTransport, target: &GrayImage, cfg: &SolverConfig) -> Result<SolverReport> {
    cfg.validate()?;
    check_target(l, target)?;
    let start = Instant::now();
    let out = descend(l, target.data(), cfg, start)?;
    let seconds = start.elapsed().as_secs_f64();
    let (w, h) = l.in_dims();
    let solution = GrayImage::from_raw(w, h, out.p)?;
    let combined = GrayImage::from_raw(l.out_dims().0, l.out_dims().1, l.mul_vec(solution.data()))?;
    let residual = norm(
        &combined
            .data()
            .iter()
            .zip(target.data())
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    );
    let sat = saturation(std::slice::from_ref(&solution), cfg.upper_bound);
    Ok(SolverReport {
        solutions: vec![solution],
        combined,
        iterations: out.iterations,
        part_iterations: vec![out.iterations],
        residual,
        histories: vec![out.history],
        seconds,
        saturation: sat,
        converged: out.converged,
    })
}

/// Independent descents, projector `i` against `c′ / N`. `seconds` is the sum
/// of the individual solve times.
pub fn solve_naive(parts: &[LightTransport], target: &GrayImage, cfg: &SolverConfig) -> Result<SolverReport> {
    cfg.validate()?;
    if parts.is_empty() {
        return Err(Error::InvalidArgument("no transports to solve".into()));
    }
    for l in parts {
        check_target(l, target)?;
        if l.in_dims() != parts[0].in_dims() {
            return Err(Error::ShapeMismatch("transports differ in input dimensions".into()));
        }
    }
    let share: Vec<f64> = target.data().iter().map(|v| v / parts.len() as f64).collect();
    let mut solutions = Vec::with_capacity(parts.len());
    let mut histories = Vec::with_capacity(parts.len());
    let mut part_iterations = Vec::with_capacity(parts.len());
    let mut seconds = 0.0;
    let mut converged = true;
    for l in parts {
        let start = Instant::now();
        let out = descend(l, &share, cfg, start)?;
        seconds += start.elapsed().as_secs_f64();
        let (w, h) = l.in_dims();
        solutions.push(GrayImage::from_raw(w, h, out.p)?);
        histories.push(out.history);
        part_iterations.push(out.iterations);
        converged &= out.converged;
    }
    let combined = apply_sum(parts, &solutions)?;
    let residual = norm(
        &combined
            .data()
            .iter()
            .zip(target.data())
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    );
    let sat = saturation(&solutions, cfg.upper_bound);
    Ok(SolverReport {
        solutions,
        combined,
        iterations: part_iterations.iter().sum(),
        part_iterations,
        residual,
        histories,
        seconds,
        saturation: sat,
        converged,
    })
}

/// `Lᵀ (L p − c′)`, shaped like `p`.
pub fn gradient(l: &LightTransport, p: &GrayImage, target: &GrayImage) -> Result<GrayImage> {
    if p.dims() != l.in_dims() || target.dims() != l.out_dims() {
        return Err(Error::ShapeMismatch(format!(
            "p {:?} / target {:?} vs transport {:?} -> {:?}",
            p.dims(),
            target.dims(),
            l.in_dims(),
            l.out_dims()
        )));
    }
    let mut r = l.mul_vec(p.data());
    r.iter_mut().zip(target.data()).for_each(|(ri, ci)| *ri -= ci);
    let g = l.transpose().mul_vec(&r);
    GrayImage::from_raw(p.width(), p.height(), g)
}

/// The uncompensated input: the target scaled to match mean brightness and
/// clamped into the box (also the solver's warm start).
pub fn uncompensated_input(l: &LightTransport, target: &GrayImage, upper: f64) -> Result<GrayImage> {
    check_target(l, target)?;
    if l.in_dims() != l.out_dims() {
        return Err(Error::ShapeMismatch("uncompensated input needs a registered transport".into()));
    }
    let mean_lc = l.mul_vec(target.data()).iter().sum::<f64>() / l.rows() as f64;
    if !(mean_lc > 0.0) {
        return Err(Error::ZeroBrightness);
    }
    let s = target.mean() / mean_lc;
    Ok(target.map(|v| (v * s).clamp(0.0, upper)))
}
