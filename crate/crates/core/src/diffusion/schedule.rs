use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Variance schedule of a `T`-step diffusion chain. All per-step accessors take
/// 1-based step indices `t ∈ 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    sigma: Vec<f64>,
    params: ScheduleParams,
}

/// The values a linear schedule is built from; this is what checkpoints store.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl ScheduleParams {
    /// Linear `1e-4 → 0.02` endpoints for `T = 1000`, scaled by `1000/T` for other lengths.
    /// For very short chains the end point is capped at 0.5.
    pub fn scaled_linear(steps: usize) -> Self {
        let scale = 1000.0 / steps.max(1) as f64;
        Self { steps, beta_start: (1e-4 * scale).min(0.5), beta_end: (0.02 * scale).min(0.5) }
    }

    pub fn build(&self) -> Result<DiffusionSchedule> {
        make_schedule(self.steps, self.beta_start, self.beta_end)
    }
}

/// Linear β schedule between the given endpoints, with `σ_t² = β_t`.
pub fn make_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<DiffusionSchedule> {
    if steps == 0 {
        return Err(Error::Parameter("schedule needs at least one step".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::Parameter(format!("need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")));
    }
    let beta: Vec<f64> = (0..steps)
        .map(|i| if steps == 1 { beta_start } else { beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64 })
        .collect();
    let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
    let alpha_bar = alpha
        .iter()
        .scan(1.0, |acc, a| {
            *acc *= a;
            Some(*acc)
        })
        .collect();
    let sigma = beta.iter().map(|b| b.sqrt()).collect();
    Ok(DiffusionSchedule { beta, alpha, alpha_bar, sigma, params: ScheduleParams { steps, beta_start, beta_end } })
}

impl DiffusionSchedule {
    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    pub fn params(&self) -> ScheduleParams {
        self.params
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t - 1]
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigma[t - 1]
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::Parameter(format!("timestep {t} outside 1..={}", self.steps())));
        }
        Ok(())
    }
}

/// Closed-form forward sample `x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·ε`.
pub fn q_sample(x0: &Image, t: usize, eps: &Image, sched: &DiffusionSchedule) -> Result<Image> {
    sched.check_step(t)?;
    let ab = sched.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    x0.zip_map(eps, |x, e| (a * f64::from(x) + b * f64::from(e)) as f32)
}

/// One ancestral step `x_{t−1} = (x_t − β_t/√(1−ᾱ_t)·ε̂)/√α_t + σ_t·z`.
///
/// `z = None` stands for the zero field; a non-zero `z` at `t = 1` is rejected.
pub fn reverse_step(x_t: &Image, t: usize, eps_hat: &Image, z: Option<&Image>, sched: &DiffusionSchedule) -> Result<Image> {
    sched.check_step(t)?;
    x_t.check_same_dims(eps_hat)?;
    if let Some(z) = z {
        x_t.check_same_dims(z)?;
        if t == 1 && z.pixels().iter().any(|&v| v != 0.0) {
            return Err(Error::Contract("the final reverse step (t = 1) must not inject noise".into()));
        }
    }
    let inv_sqrt_alpha = 1.0 / sched.alpha(t).sqrt();
    let eps_coef = sched.beta(t) / (1.0 - sched.alpha_bar(t)).sqrt();
    let sigma = sched.sigma(t);
    let mut out = x_t.zip_map(eps_hat, |x, e| (inv_sqrt_alpha * (f64::from(x) - eps_coef * f64::from(e))) as f32)?;
    if let Some(z) = z {
        for (o, &zv) in out.pixels_mut().iter_mut().zip(z.pixels()) {
            *o = (f64::from(*o) + sigma * f64::from(zv)) as f32;
        }
    }
    Ok(out)
}

/// Noise estimate consistent with the clean estimate `x̂0 = (x_t − √(1−ᾱ_t)·ε̂)/√ᾱ_t`
/// clipped to `[−1, 1]`. Feeding it to [`reverse_step`] gives the posterior mean around the
/// clipped `x̂0`; where no clipping happens it returns `ε̂` up to rounding.
pub fn clip_denoised(x_t: &Image, t: usize, eps_hat: &Image, sched: &DiffusionSchedule) -> Result<Image> {
    sched.check_step(t)?;
    let (a, b) = (sched.alpha_bar(t).sqrt(), (1.0 - sched.alpha_bar(t)).sqrt());
    x_t.zip_map(eps_hat, |x, e| {
        let x0 = ((f64::from(x) - b * f64::from(e)) / a).clamp(-1.0, 1.0);
        ((f64::from(x) - a * x0) / b) as f32
    })
}

/// Mean squared error between true and predicted noise over all elements.
pub fn loss_simple(eps: &[f32], eps_hat: &[f32]) -> Result<f64> {
    if eps.len() != eps_hat.len() || eps.is_empty() {
        return Err(Error::Dimension(format!("noise fields hold {} and {} values", eps.len(), eps_hat.len())));
    }
    Ok(eps.iter().zip(eps_hat).map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2)).sum::<f64>() / eps.len() as f64)
}
