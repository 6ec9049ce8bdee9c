//! Diffusion-prior regularizer: noise schedule, preconditioned denoisers and
//! the score-distillation loss.

use alloc::vec::Vec;
use rand::Rng;

use super::FitError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// Fraction of the run spent in the deterministic decay.
    pub warmup: f64,
    pub denoise_steps_early: usize,
    pub early_iters: usize,
    pub cfg_weight: f64,
    pub sigma_data: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            sigma_max: 80.0,
            sigma_min: 0.5,
            warmup: 0.6,
            denoise_steps_early: 2,
            early_iters: 10_000,
            cfg_weight: 4.0,
            sigma_data: 0.5,
        }
    }
}

impl NoiseSchedule {
    pub fn validate(&self) -> Result<(), FitError> {
        let ok = self.sigma_max > self.sigma_min
            && self.sigma_min > 0.0
            && self.cfg_weight >= 0.0
            && self.sigma_data > 0.0
            && (0.0..=1.0).contains(&self.warmup)
            && self.denoise_steps_early >= 1;
        if ok {
            Ok(())
        } else {
            Err(FitError::InvalidSchedule)
        }
    }

    /// Denoising passes per loss evaluation at `step`.
    pub fn denoise_steps(&self, step: usize) -> usize {
        if step < self.early_iters {
            self.denoise_steps_early
        } else {
            1
        }
    }
}

/// Noise level at `step`: log-linear decay from `sigma_max` to `sigma_min`
/// over the warmup, then log-uniform draws in `[sigma_min, sigma_max]`.
/// The generator is only consumed after the warmup.
pub fn schedule_sigma<R: Rng + ?Sized>(s: &NoiseSchedule, step: usize, total_steps: usize, rng: &mut R) -> f64 {
    let ratio = s.sigma_min / s.sigma_max;
    let warm = s.warmup * total_steps as f64;
    if (step as f64) < warm {
        s.sigma_max * libm::pow(ratio, step as f64 / warm)
    } else {
        let u: f64 = rng.random();
        s.sigma_min * libm::pow(s.sigma_max / s.sigma_min, u)
    }
}

/// Loss weight `(σ² + σ_d²) / (σ σ_d)²`.
pub fn lambda_sigma(sigma: f64, sigma_data: f64) -> f64 {
    (sigma * sigma + sigma_data * sigma_data) / (sigma * sigma_data * sigma * sigma_data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Precond {
    pub c_skip: f64,
    pub c_out: f64,
    pub c_in: f64,
    pub c_noise: f64,
}

pub fn precond(sigma: f64, sigma_data: f64) -> Precond {
    let (s2, d2) = (sigma * sigma, sigma_data * sigma_data);
    Precond {
        c_skip: d2 / (s2 + d2),
        c_out: sigma * sigma_data / libm::sqrt(s2 + d2),
        c_in: 1.0 / libm::sqrt(s2 + d2),
        c_noise: libm::log(sigma) / 4.0,
    }
}

/// Raw network `F(c_in·x, c_noise, c)` wrapped by preconditioning.
pub trait DenoiserCore: Sync {
    fn core(&self, x_in: &[f64], c_noise: f64, condition: Option<&[f64]>) -> Vec<f64>;
}

/// `D(x, σ, c)`: pure, deterministic, same length as `x`.
pub trait Denoiser: Sync {
    fn denoise(&self, x: &[f64], sigma: f64, condition: Option<&[f64]>) -> Vec<f64>;
}

/// `c_skip·x + c_out·F(c_in·x, c_noise)`.
pub fn edm_precondition<C: DenoiserCore + ?Sized>(
    x: &[f64],
    sigma: f64,
    core: &C,
    sigma_data: f64,
    condition: Option<&[f64]>,
) -> Result<Vec<f64>, FitError> {
    if !(sigma > 0.0) {
        return Err(FitError::BadSigma(sigma));
    }
    let p = precond(sigma, sigma_data);
    let x_in: Vec<f64> = x.iter().map(|v| v * p.c_in).collect();
    let f = core.core(&x_in, p.c_noise, condition);
    if f.len() != x.len() {
        return Err(FitError::ShapeMismatch { expected: x.len(), got: f.len() });
    }
    Ok(x.iter().zip(&f).map(|(xv, fv)| p.c_skip * xv + p.c_out * fv).collect())
}

/// A core together with its preconditioning.
pub struct Preconditioned<C> {
    pub core: C,
    pub sigma_data: f64,
}

impl<C: DenoiserCore> Denoiser for Preconditioned<C> {
    fn denoise(&self, x: &[f64], sigma: f64, condition: Option<&[f64]>) -> Vec<f64> {
        edm_precondition(x, sigma, &self.core, self.sigma_data, condition).unwrap_or_else(|_| x.to_vec())
    }
}

/// Returns its input.
pub struct IdentityDenoiser;

impl Denoiser for IdentityDenoiser {
    fn denoise(&self, x: &[f64], _sigma: f64, _condition: Option<&[f64]>) -> Vec<f64> {
        x.to_vec()
    }
}

/// Core whose preconditioned output is the exact posterior mean for data
/// drawn from `N(mean, variance·I)`: `D = μ + s²/(s²+σ²)·(x − μ)`.
pub struct GaussianToyCore {
    pub mean: f64,
    pub variance: f64,
    pub sigma_data: f64,
}

impl GaussianToyCore {
    pub fn posterior_mean(&self, x: f64, sigma: f64) -> f64 {
        self.mean + self.variance / (self.variance + sigma * sigma) * (x - self.mean)
    }
}

impl DenoiserCore for GaussianToyCore {
    fn core(&self, x_in: &[f64], c_noise: f64, _condition: Option<&[f64]>) -> Vec<f64> {
        let sigma = libm::exp(4.0 * c_noise);
        let p = precond(sigma, self.sigma_data);
        x_in.iter()
            .map(|v| {
                let x = v / p.c_in;
                (self.posterior_mean(x, sigma) - p.c_skip * x) / p.c_out
            })
            .collect()
    }
}

pub fn gaussian_toy(mean: f64, variance: f64, sigma_data: f64) -> Preconditioned<GaussianToyCore> {
    Preconditioned { core: GaussianToyCore { mean, variance, sigma_data }, sigma_data }
}

/// Pulls each texel descriptor toward its 3×3 neighborhood mean, more
/// strongly at high noise: `x + σ²/(σ²+σ_d²)·(box(x) − x)`. Needs the grid
/// layout of the feature map.
pub struct SmoothingDenoiser {
    pub grid: usize,
    pub dim: usize,
    pub sigma_data: f64,
}

impl Denoiser for SmoothingDenoiser {
    fn denoise(&self, x: &[f64], sigma: f64, _condition: Option<&[f64]>) -> Vec<f64> {
        let (g, dim) = (self.grid, self.dim);
        if x.len() != g * g * dim {
            return x.to_vec();
        }
        let t = sigma * sigma / (sigma * sigma + self.sigma_data * self.sigma_data);
        let mut out = x.to_vec();
        for j in 0..g {
            for i in 0..g {
                let mut acc = alloc::vec![0.0; dim];
                let mut n = 0.0;
                for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let (a, b) = (i as i64 + di, j as i64 + dj);
                        if a < 0 || b < 0 || a >= g as i64 || b >= g as i64 {
                            continue;
                        }
                        let base = (b as usize * g + a as usize) * dim;
                        for k in 0..dim {
                            acc[k] += x[base + k];
                        }
                        n += 1.0;
                    }
                }
                let base = (j * g + i) * dim;
                for k in 0..dim {
                    out[base + k] = x[base + k] + t * (acc[k] / n - x[base + k]);
                }
            }
        }
        out
    }
}

/// Classifier-free guidance: `D_u + w·(D_c − D_u)`. The conditional branch
/// runs only with a condition and `w != 0`.
pub fn guided(d: &dyn Denoiser, x: &[f64], sigma: f64, condition: Option<&[f64]>, w: f64) -> Vec<f64> {
    let uncond = d.denoise(x, sigma, None);
    match condition {
        Some(c) if w != 0.0 => {
            let cond = d.denoise(x, sigma, Some(c));
            uncond.iter().zip(&cond).map(|(u, c)| u + w * (c - u)).collect()
        }
        _ => uncond,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffLoss {
    pub value: f64,
    /// Gradient with respect to `y`, denoiser output held fixed.
    pub grad: Vec<f64>,
    pub sigma: f64,
    pub denoised: Vec<f64>,
}

/// One draw of the diffusion loss at a given noise level.
///
/// `x = y + σε`, then `steps` guided denoising passes; between passes the
/// noise level halves (not below `sigma_min`) with an Euler move
/// `x ← x̂ + (σ'/σ)(x − x̂)`. Value `λ(σ)·‖x̂ − y‖²`, gradient `2λ(σ)(y − x̂)`.
#[allow(clippy::too_many_arguments)]
pub fn loss_diffusion_at<R: Rng + ?Sized>(
    y: &[f64],
    d: &dyn Denoiser,
    sigma: f64,
    steps: usize,
    sigma_min: f64,
    sigma_data: f64,
    cfg_weight: f64,
    condition: Option<&[f64]>,
    rng: &mut R,
) -> Result<DiffLoss, FitError> {
    if !(sigma > 0.0) {
        return Err(FitError::BadSigma(sigma));
    }
    let mut x: Vec<f64> = y.iter().map(|v| v + sigma * crate::rng::normal(rng)).collect();
    let mut s = sigma;
    let mut xhat = Vec::new();
    for k in 0..steps.max(1) {
        xhat = guided(d, &x, s, condition, cfg_weight);
        if xhat.len() != y.len() {
            return Err(FitError::ShapeMismatch { expected: y.len(), got: xhat.len() });
        }
        if k + 1 < steps {
            let next = (0.5 * s).max(sigma_min);
            let r = next / s;
            for (xv, hv) in x.iter_mut().zip(&xhat) {
                *xv = hv + r * (*xv - hv);
            }
            s = next;
        }
    }
    let lam = lambda_sigma(sigma, sigma_data);
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(y.len());
    for (yv, hv) in y.iter().zip(&xhat) {
        let r = yv - hv;
        value += r * r;
        grad.push(2.0 * lam * r);
    }
    Ok(DiffLoss { value: lam * value, grad, sigma, denoised: xhat })
}

/// Schedule-driven draw at `step` of `total_steps`.
pub fn loss_diffusion<R: Rng + ?Sized>(
    y: &[f64],
    d: &dyn Denoiser,
    schedule: &NoiseSchedule,
    step: usize,
    total_steps: usize,
    condition: Option<&[f64]>,
    rng: &mut R,
) -> Result<DiffLoss, FitError> {
    let sigma = schedule_sigma(schedule, step, total_steps, rng);
    loss_diffusion_at(
        y,
        d,
        sigma,
        schedule.denoise_steps(step),
        schedule.sigma_min,
        schedule.sigma_data,
        schedule.cfg_weight,
        condition,
        rng,
    )
}
