//! Run configuration: a TOML file with one table per stage. Every key is
//! optional and unknown keys are rejected.
//!
//! ```toml
//! seed = 0
//!
//! [input]
//! hair_mesh = "scan.ply"
//! scalp_mesh = "scalp.obj"   # omit for the built-in hemisphere
//! edge_maps = "edges/"       # optional edge_{view:03}.png files
//! condition = "embed.txt"    # optional condition embedding
//! gt_strands = "gt.hair"     # optional, evaluated by `all`
//!
//! [output]
//! dir = "out"
//!
//! [fit]
//! steps = 75000
//! lr = 0.001
//! ```
//!
//! See [`RunConfig`] and the stage tables below for the full key set.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hairfit_core::crest::CrestFilter;
use hairfit_core::eval::MetricThreshold;
use hairfit_core::fit::{FitConfig, LossWeights, NoiseSchedule};
use hairfit_core::orient2d::{LiftParams, Orient2dParams};
use hairfit_core::orient3d::FieldParams;

use crate::error::{ConfigError, Error};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub input: InputConfig,
    pub output: OutputConfig,
    pub mesh: MeshConfig,
    pub curvature: CurvatureConfig,
    pub crest: CrestConfig,
    pub orient3d: Orient3dConfig,
    pub render: RenderConfig,
    pub orient2d: Orient2dConfig,
    pub scalp: ScalpConfig,
    pub fit: FitSection,
    pub weights: WeightsConfig,
    pub prior: PriorConfig,
    pub eval: EvalConfig,
    pub voxelize: VoxelizeConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub hair_mesh: Option<PathBuf>,
    pub scalp_mesh: Option<PathBuf>,
    pub edge_maps: Option<PathBuf>,
    pub condition: Option<PathBuf>,
    /// Ground-truth strands; `all` evaluates against them when set.
    pub gt_strands: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write per-view shading, edge and depth images.
    pub views: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), views: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub weld_epsilon: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { weld_epsilon: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvatureConfig {
    pub ring: usize,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        Self { ring: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrestConfig {
    pub percentile: f64,
    pub min_points: usize,
    pub min_strength: f64,
}

impl Default for CrestConfig {
    fn default() -> Self {
        let f = CrestFilter::default();
        Self { percentile: f.percentile, min_points: f.min_points, min_strength: f.min_strength }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Orient3dConfig {
    pub w_min: usize,
    pub w_max: usize,
    pub smooth_lambda: f64,
    pub radius: f64,
}

impl Default for Orient3dConfig {
    fn default() -> Self {
        let p = FieldParams::default();
        Self { w_min: p.w_min, w_max: p.w_max, smooth_lambda: p.smooth_lambda, radius: p.radius }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub views: usize,
    pub elevation_deg: f64,
    pub width: usize,
    pub height: usize,
    pub fov_deg: f64,
    /// Camera distance from the mesh center, mm; 0 frames the bounding sphere.
    pub distance: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { views: 16, elevation_deg: 15.0, width: 1024, height: 1024, fov_deg: 40.0, distance: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Orient2dConfig {
    pub low: f64,
    pub high: f64,
    pub threshold: f64,
    pub spur_len: usize,
    pub min_path: usize,
    pub discontinuity: f64,
    pub window: usize,
    pub field_radius: f64,
}

impl Default for Orient2dConfig {
    fn default() -> Self {
        let p = Orient2dParams::default();
        Self {
            low: p.low,
            high: p.high,
            threshold: p.threshold,
            spur_len: p.spur_len,
            min_path: p.min_path,
            discontinuity: p.lift.discontinuity,
            window: p.lift.window,
            field_radius: FieldParams::default().radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalpConfig {
    /// Radius of the built-in hemisphere scalp, mm.
    pub radius: f64,
    pub tau: f64,
    pub resolution: usize,
    pub strands: usize,
    pub points_per_strand: usize,
    pub length: f64,
    pub init_noise: f64,
}

impl Default for ScalpConfig {
    fn default() -> Self {
        Self {
            radius: 80.0,
            tau: 6.0,
            resolution: 256,
            strands: 10_000,
            points_per_strand: 25,
            length: 100.0,
            init_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub steps: usize,
    pub lr: f64,
    pub milestones: Vec<f64>,
    pub gamma: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub near_mm: f64,
    pub chamfer_samples: usize,
    pub feature_grid: usize,
    /// Write a checkpoint every this many steps; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        let c = FitConfig::default();
        Self {
            steps: c.total_steps,
            lr: c.lr,
            milestones: c.milestones,
            gamma: c.gamma,
            beta1: c.beta1,
            beta2: c.beta2,
            eps: c.eps,
            near_mm: c.near_mm,
            chamfer_samples: c.chamfer_samples,
            feature_grid: c.feature_grid,
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub vol: f64,
    pub chm: f64,
    pub orient: f64,
    pub diff: f64,
    pub alpha: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        Self { vol: w.vol, chm: w.chm, orient: w.orient, diff: w.diff, alpha: w.alpha }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserKind {
    None,
    GaussianToy,
    Smoothing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub denoiser: DenoiserKind,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub warmup: f64,
    pub denoise_steps_early: usize,
    pub early_iters: usize,
    pub cfg_weight: f64,
    pub sigma_data: f64,
    /// Mean and variance of the Gaussian toy prior.
    pub toy_mean: f64,
    pub toy_variance: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        let s = NoiseSchedule::default();
        Self {
            denoiser: DenoiserKind::Smoothing,
            sigma_max: s.sigma_max,
            sigma_min: s.sigma_min,
            warmup: s.warmup,
            denoise_steps_early: s.denoise_steps_early,
            early_iters: s.early_iters,
            cfg_weight: s.cfg_weight,
            sigma_data: s.sigma_data,
            toy_mean: 0.0,
            toy_variance: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// `[distance_mm, angle_deg]` pairs.
    pub thresholds: Vec<[f64; 2]>,
    pub samples_per_strand: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            thresholds: hairfit_core::eval::DEFAULT_THRESHOLDS.iter().map(|t| [t.distance, t.angle]).collect(),
            samples_per_strand: hairfit_core::eval::DEFAULT_SAMPLES_PER_STRAND,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoxelizeConfig {
    pub voxel: f64,
    pub radius: f64,
}

impl Default for VoxelizeConfig {
    fn default() -> Self {
        Self { voxel: hairfit_core::eval::DEFAULT_VOXEL, radius: hairfit_core::eval::DEFAULT_TUBE_RADIUS }
    }
}

fn check(ok: bool, key: &str, message: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(key, message))
    }
}

fn positive(v: f64, key: &str) -> Result<(), ConfigError> {
    check(v > 0.0 && v.is_finite(), key, "must be positive and finite")
}

fn fraction(v: f64, key: &str) -> Result<(), ConfigError> {
    check((0.0..=1.0).contains(&v), key, "must lie in [0, 1]")
}

fn nonneg(v: f64, key: &str) -> Result<(), ConfigError> {
    check(v >= 0.0 && v.is_finite(), key, "must be nonnegative and finite")
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigFile { path: path.to_path_buf(), message: e.to_string() })?;
        Self::from_toml(&text).map_err(|e| Error::ConfigFile { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Check every value against the precondition of the stage that uses it.
    pub fn validate(&self) -> Result<(), ConfigError> {
        nonneg(self.mesh.weld_epsilon, "mesh.weld_epsilon")?;
        check(self.curvature.ring >= 1, "curvature.ring", "must be at least 1")?;
        check(self.crest.percentile > 0.0 && self.crest.percentile <= 1.0, "crest.percentile", "must lie in (0, 1]")?;
        nonneg(self.crest.min_strength, "crest.min_strength")?;
        let o = &self.orient3d;
        check(o.w_min >= 1, "orient3d.w_min", "must be at least 1")?;
        check(o.w_max >= o.w_min, "orient3d.w_max", "must be at least w_min")?;
        fraction(o.smooth_lambda, "orient3d.smooth_lambda")?;
        positive(o.radius, "orient3d.radius")?;
        let r = &self.render;
        check(r.views >= 1, "render.views", "must be at least 1")?;
        check(r.width >= 1 && r.height >= 1, "render.width", "image must be at least 1×1")?;
        check(r.fov_deg > 0.0 && r.fov_deg < 180.0, "render.fov_deg", "must lie in (0, 180)")?;
        check(r.elevation_deg.abs() < 90.0, "render.elevation_deg", "must lie in (-90, 90)")?;
        nonneg(r.distance, "render.distance")?;
        let e = &self.orient2d;
        check(e.low > 0.0 && e.low <= e.high, "orient2d.low", "must satisfy 0 < low ≤ high")?;
        fraction(e.high, "orient2d.high")?;
        fraction(e.threshold, "orient2d.threshold")?;
        check(e.min_path >= 2, "orient2d.min_path", "must be at least 2")?;
        positive(e.discontinuity, "orient2d.discontinuity")?;
        check(e.window >= 1, "orient2d.window", "must be at least 1")?;
        positive(e.field_radius, "orient2d.field_radius")?;
        let s = &self.scalp;
        positive(s.radius, "scalp.radius")?;
        positive(s.tau, "scalp.tau")?;
        check(s.resolution >= 1 && s.resolution <= u16::MAX as usize + 1, "scalp.resolution", "must lie in 1..=65536")?;
        check(s.strands >= 1, "scalp.strands", "must be at least 1")?;
        check(s.points_per_strand >= 2, "scalp.points_per_strand", "must be at least 2")?;
        positive(s.length, "scalp.length")?;
        nonneg(s.init_noise, "scalp.init_noise")?;
        let f = &self.fit;
        check(f.steps >= 1, "fit.steps", "must be at least 1")?;
        positive(f.lr, "fit.lr")?;
        check(f.milestones.iter().all(|m| *m > 0.0 && *m < 1.0), "fit.milestones", "must lie in (0, 1)")?;
        check(f.gamma > 0.0 && f.gamma <= 1.0, "fit.gamma", "must lie in (0, 1]")?;
        check((0.0..1.0).contains(&f.beta1), "fit.beta1", "must lie in [0, 1)")?;
        check((0.0..1.0).contains(&f.beta2), "fit.beta2", "must lie in [0, 1)")?;
        positive(f.eps, "fit.eps")?;
        positive(f.near_mm, "fit.near_mm")?;
        check(f.feature_grid >= 1, "fit.feature_grid", "must be at least 1")?;
        let w = &self.weights;
        nonneg(w.vol, "weights.vol")?;
        nonneg(w.chm, "weights.chm")?;
        nonneg(w.orient, "weights.orient")?;
        nonneg(w.diff, "weights.diff")?;
        fraction(w.alpha, "weights.alpha")?;
        let p = &self.prior;
        positive(p.sigma_min, "prior.sigma_min")?;
        check(p.sigma_max > p.sigma_min, "prior.sigma_max", "must exceed sigma_min")?;
        fraction(p.warmup, "prior.warmup")?;
        check(p.denoise_steps_early >= 1, "prior.denoise_steps_early", "must be at least 1")?;
        nonneg(p.cfg_weight, "prior.cfg_weight")?;
        positive(p.sigma_data, "prior.sigma_data")?;
        positive(p.toy_variance, "prior.toy_variance")?;
        check(!self.eval.thresholds.is_empty(), "eval.thresholds", "needs at least one threshold")?;
        for t in &self.eval.thresholds {
            check(t[0] > 0.0 && t[1] > 0.0, "eval.thresholds", "distance and angle must be positive")?;
        }
        check(self.eval.samples_per_strand >= 1, "eval.samples_per_strand", "must be at least 1")?;
        positive(self.voxelize.voxel, "voxelize.voxel")?;
        check(
            self.voxelize.radius >= 0.5 * self.voxelize.voxel,
            "voxelize.radius",
            "must be at least half the voxel size",
        )?;
        Ok(())
    }

    pub fn crest_filter(&self) -> CrestFilter {
        CrestFilter {
            percentile: self.crest.percentile,
            min_points: self.crest.min_points,
            min_strength: self.crest.min_strength,
        }
    }

    pub fn field_params(&self) -> FieldParams {
        let o = &self.orient3d;
        FieldParams { w_min: o.w_min, w_max: o.w_max, smooth_lambda: o.smooth_lambda, radius: o.radius }
    }

    pub fn orient2d_params(&self) -> Orient2dParams {
        let e = &self.orient2d;
        Orient2dParams {
            low: e.low,
            high: e.high,
            threshold: e.threshold,
            spur_len: e.spur_len,
            min_path: e.min_path,
            lift: LiftParams { discontinuity: e.discontinuity, window: e.window },
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        let f = &self.fit;
        FitConfig {
            total_steps: f.steps,
            lr: f.lr,
            milestones: f.milestones.clone(),
            gamma: f.gamma,
            beta1: f.beta1,
            beta2: f.beta2,
            eps: f.eps,
            near_mm: f.near_mm,
            chamfer_samples: f.chamfer_samples,
            seed: self.seed,
            feature_grid: f.feature_grid,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        let w = &self.weights;
        LossWeights { vol: w.vol, chm: w.chm, orient: w.orient, diff: w.diff, alpha: w.alpha }
    }

    pub fn schedule(&self) -> NoiseSchedule {
        let p = &self.prior;
        NoiseSchedule {
            sigma_max: p.sigma_max,
            sigma_min: p.sigma_min,
            warmup: p.warmup,
            denoise_steps_early: p.denoise_steps_early,
            early_iters: p.early_iters,
            cfg_weight: p.cfg_weight,
            sigma_data: p.sigma_data,
        }
    }

    pub fn thresholds(&self) -> Vec<MetricThreshold> {
        self.eval.thresholds.iter().map(|t| MetricThreshold { distance: t[0], angle: t[1] }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(RunConfig::from_toml("").unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("sed = 1").is_err());
        assert!(RunConfig::from_toml("[fit]\nlearning_rate = 0.1").is_err());
    }

    #[test]
    fn validation_names_the_key() {
        let mut c = RunConfig::default();
        c.render.views = 0;
        assert_eq!(c.validate().unwrap_err().key, "render.views");
        let mut c = RunConfig::default();
        c.voxelize.radius = 0.1;
        assert_eq!(c.validate().unwrap_err().key, "voxelize.radius");
        let mut c = RunConfig::default();
        c.weights.alpha = 1.5;
        assert_eq!(c.validate().unwrap_err().key, "weights.alpha");
    }
}
