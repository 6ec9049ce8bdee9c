//! Strand optimization: geometric losses, the optional diffusion prior and
//! an Adam loop with step-decayed learning rate.

mod diffusion;
mod features;
mod losses;

pub use diffusion::*;
pub use features::*;
pub use losses::*;

use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

use crate::geom::Vec3;
use crate::mesh::{sample_surface, TriMesh};
use crate::orient3d::OrientationField3D;
use crate::rng::{stream, Purpose};
use crate::strand::{Hairstyle, ScalpMap};
use crate::udf::TriBvh;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("hairstyle has no strands")]
    EmptyHairstyle,
    #[error("noise level must be positive, got {0}")]
    BadSigma(f64),
    #[error("denoiser returned {got} values for {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid noise schedule")]
    InvalidSchedule,
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("non-finite loss at step {step}: {terms}")]
    NonFinite { step: usize, terms: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub vol: f64,
    pub chm: f64,
    pub orient: f64,
    pub diff: f64,
    /// Share of the 3D field in the orientation loss.
    pub alpha: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { vol: 1.0, chm: 1.0, orient: 1.0, diff: 0.01, alpha: 0.5 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), FitError> {
        let w = [self.vol, self.chm, self.orient, self.diff];
        if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(FitError::InvalidConfig("loss weights must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(FitError::InvalidConfig("alpha must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub total_steps: usize,
    pub lr: f64,
    /// Fractions of `total_steps` at which the learning rate is multiplied
    /// by `gamma`.
    pub milestones: Vec<f64>,
    pub gamma: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Segments whose midpoint is farther than this from the hair surface
    /// get no orientation loss, mm.
    pub near_mm: f64,
    /// Surface samples per step for the Chamfer term.
    pub chamfer_samples: usize,
    pub seed: u64,
    /// Feature-map resolution for the prior.
    pub feature_grid: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            total_steps: 75_000,
            lr: 1e-3,
            milestones: alloc::vec![1.0 / 3.0, 2.0 / 3.0],
            gamma: 0.5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            near_mm: 3.0,
            chamfer_samples: 20_000,
            seed: 0,
            feature_grid: 32,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if self.total_steps < 1 {
            return Err(FitError::InvalidConfig("total_steps must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(FitError::InvalidConfig("lr must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(FitError::InvalidConfig("gamma must lie in (0, 1]"));
        }
        if self.milestones.iter().any(|m| !(*m > 0.0 && *m < 1.0)) {
            return Err(FitError::InvalidConfig("milestones must lie in (0, 1)"));
        }
        if !(self.near_mm > 0.0) {
            return Err(FitError::InvalidConfig("near_mm must be positive"));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.eps > 0.0) {
            return Err(FitError::InvalidConfig("Adam moments must lie in [0, 1) and eps > 0"));
        }
        if self.feature_grid == 0 {
            return Err(FitError::InvalidConfig("feature_grid must be positive"));
        }
        Ok(())
    }

    /// Learning rate in effect at `step`.
    pub fn lr_at(&self, step: usize) -> f64 {
        let passed =
            self.milestones.iter().filter(|m| step >= libm::round(*m * self.total_steps as f64) as usize).count();
        self.lr * libm::pow(self.gamma, passed as f64)
    }
}

/// The diffusion prior: denoiser, schedule and optional condition embedding.
pub struct Prior<'a> {
    pub denoiser: &'a dyn Denoiser,
    pub schedule: NoiseSchedule,
    pub condition: Option<&'a [f64]>,
}

/// Fixed supervision for a run.
pub struct FitContext<'a> {
    pub hair: &'a TriMesh,
    pub bvh: &'a TriBvh,
    pub field3d: &'a OrientationField3D,
    pub field2d: &'a OrientationField3D,
    pub scalp: &'a ScalpMap,
    pub prior: Option<Prior<'a>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub vol: f64,
    pub chm: f64,
    pub orient3d: f64,
    pub orient2d: f64,
    pub diff: f64,
    pub total: f64,
    /// Noise level of the prior draw, 0 when the prior is off.
    pub sigma: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub hairstyle: Hairstyle,
    pub trace: Vec<TraceRow>,
}

/// Weighted loss terms and the summed gradient for one step.
pub fn evaluate_step(
    h: &Hairstyle,
    ctx: &FitContext<'_>,
    w: &LossWeights,
    cfg: &FitConfig,
    step: usize,
    layout: Option<&FeatureLayout>,
) -> Result<(TraceRow, Vec<Vec3>), FitError> {
    let n = h.points.len();
    let mut grad = alloc::vec![Vec3::ZERO; n];
    let mut row = TraceRow {
        step,
        vol: 0.0,
        chm: 0.0,
        orient3d: 0.0,
        orient2d: 0.0,
        diff: 0.0,
        total: 0.0,
        sigma: 0.0,
        lr: cfg.lr_at(step),
    };
    let mut add = |g: &[Vec3], s: f64| {
        for (a, b) in grad.iter_mut().zip(g) {
            *a += *b * s;
        }
    };
    if w.vol > 0.0 {
        let l = loss_volume(h, ctx.bvh);
        row.vol = l.value;
        add(&l.grad, w.vol);
    }
    if w.chm > 0.0 && cfg.chamfer_samples > 0 {
        let mut rng = stream(cfg.seed, Purpose::SurfaceSamples, step as u64);
        let samples: Vec<Vec3> =
            sample_surface(ctx.hair, cfg.chamfer_samples, &mut rng).into_iter().map(|s| s.0).collect();
        let l = loss_chamfer(h, &samples)?;
        row.chm = l.value;
        add(&l.grad, w.chm);
    }
    if w.orient > 0.0 {
        let l = loss_orient(h, ctx.field3d, ctx.field2d, ctx.bvh, w.alpha, cfg.near_mm);
        row.orient3d = l.l3d;
        row.orient2d = l.l2d;
        add(&l.grad, w.orient);
    }
    let mut orient = w.alpha * row.orient3d + (1.0 - w.alpha) * row.orient2d;
    if let (Some(prior), Some(layout)) = (&ctx.prior, layout) {
        if w.diff > 0.0 {
            let fm = layout.features(h);
            let mut rng = stream(cfg.seed, Purpose::DiffusionNoise, step as u64);
            let l = loss_diffusion(
                &fm.data,
                prior.denoiser,
                &prior.schedule,
                step,
                cfg.total_steps,
                prior.condition,
                &mut rng,
            )?;
            row.diff = l.value;
            row.sigma = l.sigma;
            add(&layout.backprop(&l.grad, n), w.diff);
        }
    }
    if w.orient == 0.0 {
        orient = 0.0;
    }
    row.total = w.vol * row.vol + w.chm * row.chm + w.orient * orient + w.diff * row.diff;
    if !row.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(FitError::NonFinite {
            step,
            terms: alloc::format!(
                "vol={} chm={} orient3d={} orient2d={} diff={}",
                row.vol,
                row.chm,
                row.orient3d,
                row.orient2d,
                row.diff
            ),
        });
    }
    Ok((row, grad))
}

/// Optimize all non-root strand points with Adam. `on_step` sees the
/// hairstyle after each update (for checkpoints).
pub fn fit_with(
    mut h: Hairstyle,
    ctx: &FitContext<'_>,
    weights: &LossWeights,
    cfg: &FitConfig,
    on_step: &mut dyn FnMut(usize, &Hairstyle),
) -> Result<FitResult, FitError> {
    cfg.validate()?;
    weights.validate()?;
    if h.is_empty() {
        return Err(FitError::EmptyHairstyle);
    }
    if let Some(p) = &ctx.prior {
        p.schedule.validate()?;
    }
    let layout = ctx.prior.as_ref().map(|_| FeatureLayout::new(&h, ctx.scalp, cfg.feature_grid));
    let l = h.points_per_strand();
    let n = h.points.len();
    let mut m = alloc::vec![Vec3::ZERO; n];
    let mut v = alloc::vec![Vec3::ZERO; n];
    let mut trace = Vec::with_capacity(cfg.total_steps);
    let (mut b1t, mut b2t) = (1.0, 1.0);
    for step in 0..cfg.total_steps {
        let (row, grad) = evaluate_step(&h, ctx, weights, cfg, step, layout.as_ref())?;
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        let lr = row.lr;
        for (k, g) in grad.iter().enumerate() {
            if k % l == 0 {
                continue;
            }
            let mut p = h.points[k];
            for a in 0..3 {
                m[k][a] = cfg.beta1 * m[k][a] + (1.0 - cfg.beta1) * g[a];
                v[k][a] = cfg.beta2 * v[k][a] + (1.0 - cfg.beta2) * g[a] * g[a];
                let mh = m[k][a] / (1.0 - b1t);
                let vh = v[k][a] / (1.0 - b2t);
                p[a] -= lr * mh / (libm::sqrt(vh) + cfg.eps);
            }
            h.points[k] = p;
        }
        trace.push(row);
        on_step(step, &h);
    }
    Ok(FitResult { hairstyle: h, trace })
}

pub fn fit(h: Hairstyle, ctx: &FitContext<'_>, weights: &LossWeights, cfg: &FitConfig) -> Result<FitResult, FitError> {
    fit_with(h, ctx, weights, cfg, &mut |_, _| {})
}
