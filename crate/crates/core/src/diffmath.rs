//! DDPM noise-schedule arithmetic.
//!
//! With `α_t = 1 − β_t` and `ᾱ_t = Π_{s≤t} α_s`:
//!
//! - forward sample: `x_t = √ᾱ_t · x₀ + √(1 − ᾱ_t) · ε`
//! - reverse mean:   `μ = (x_t − β_t / √(1 − ᾱ_t) · ε̂) / √α_t`
//! - reverse variance: `β_t · I`
//!
//! Timesteps are 1-based throughout.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffusionError {
    #[error("beta[{index}] = {value} is outside (0, 1)")]
    InvalidSchedule { index: usize, value: f64 },
    #[error("shape mismatch: {left} vs {right} elements")]
    Shape { left: usize, right: usize },
    #[error("timestep {t} outside 1..={steps}")]
    Range { t: usize, steps: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    /// Number of timesteps `T`.
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    fn index(&self, t: usize) -> Result<usize, DiffusionError> {
        if t == 0 || t > self.steps() {
            return Err(DiffusionError::Range { t, steps: self.steps() });
        }
        Ok(t - 1)
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64, DiffusionError> {
        Ok(self.alpha_bars[self.index(t)?])
    }
}

pub fn build_schedule(betas: &[f64]) -> Result<DiffusionSchedule, DiffusionError> {
    if let Some((index, &value)) = betas.iter().enumerate().find(|(_, &b)| !(b > 0.0 && b < 1.0)) {
        return Err(DiffusionError::InvalidSchedule { index, value });
    }
    let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
    let alpha_bars = alphas
        .iter()
        .scan(1.0, |acc, a| {
            *acc *= a;
            Some(*acc)
        })
        .collect();
    Ok(DiffusionSchedule {
        betas: betas.to_vec(),
        alphas,
        alpha_bars,
    })
}

/// `steps` betas evenly spaced from `start` to `end` inclusive.
pub fn linear_betas(steps: usize, start: f64, end: f64) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..steps)
            .map(|i| start + (end - start) * i as f64 / (steps - 1) as f64)
            .collect(),
    }
}

fn same_shape(a: &[f64], b: &[f64]) -> Result<(), DiffusionError> {
    if a.len() != b.len() {
        return Err(DiffusionError::Shape {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

pub fn forward_sample(x0: &[f64], t: usize, eps: &[f64], sched: &DiffusionSchedule) -> Result<Vec<f64>, DiffusionError> {
    same_shape(x0, eps)?;
    let ab = sched.alpha_bar(t)?;
    let (signal, noise) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0.iter().zip(eps).map(|(x, e)| signal * x + noise * e).collect())
}

pub fn posterior_mean(
    xt: &[f64],
    t: usize,
    eps_pred: &[f64],
    sched: &DiffusionSchedule,
) -> Result<Vec<f64>, DiffusionError> {
    same_shape(xt, eps_pred)?;
    let i = sched.index(t)?;
    let coef = sched.betas[i] / (1.0 - sched.alpha_bars[i]).sqrt();
    let inv_sqrt_alpha = 1.0 / sched.alphas[i].sqrt();
    Ok(xt
        .iter()
        .zip(eps_pred)
        .map(|(x, e)| inv_sqrt_alpha * (x - coef * e))
        .collect())
}

/// The reverse-step variance `β_t` (a multiple of the identity).
pub fn fixed_variance(t: usize, sched: &DiffusionSchedule) -> Result<f64, DiffusionError> {
    Ok(sched.betas[sched.index(t)?])
}
