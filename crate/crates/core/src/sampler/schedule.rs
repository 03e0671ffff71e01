use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSchedule {
    #[default]
    Linear,
}

/// Deterministic (eta = 0) DDIM settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub train_steps: usize,
    pub sample_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub schedule: BetaSchedule,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            train_steps: 1000,
            sample_steps: 50,
            beta_start: 1e-4,
            beta_end: 0.02,
            schedule: BetaSchedule::Linear,
        }
    }
}

impl SamplerConfig {
    pub fn with_sample_steps(self, sample_steps: usize) -> Self {
        Self {
            sample_steps,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_steps < 2 {
            return Err(Error::invalid("train_steps must be at least 2"));
        }
        if self.sample_steps == 0 || self.sample_steps > self.train_steps {
            return Err(Error::invalid(format!(
                "sample_steps must lie in 1..={}, got {}",
                self.train_steps, self.sample_steps
            )));
        }
        let ok = |b: f64| b.is_finite() && b > 0.0 && b < 1.0;
        if !ok(self.beta_start) || !ok(self.beta_end) || self.beta_start > self.beta_end {
            return Err(Error::invalid(format!(
                "betas must satisfy 0 < beta_start <= beta_end < 1, got {} and {}",
                self.beta_start, self.beta_end
            )));
        }
        Ok(())
    }
}

/// One DDIM transition from timestep `t` to the previous sampled timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub t: usize,
    pub alpha_bar: f64,
    /// Cumulative alpha of the target timestep; 1 for the final step.
    pub alpha_bar_prev: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alpha_bars: Vec<f64>,
    timesteps: Vec<usize>,
}

impl NoiseSchedule {
    pub fn new(cfg: &SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.train_steps;
        let span = cfg.beta_end - cfg.beta_start;
        let mut alpha_bars = Vec::with_capacity(n);
        let mut prod = 1.0;
        for t in 0..n {
            let beta = cfg.beta_start + span * t as f64 / (n - 1) as f64;
            prod *= 1.0 - beta;
            alpha_bars.push(prod);
        }
        let ratio = n / cfg.sample_steps;
        let timesteps = (0..cfg.sample_steps).rev().map(|s| s * ratio).collect();
        Ok(Self {
            alpha_bars,
            timesteps,
        })
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    /// Sampled timesteps, descending.
    pub fn timesteps(&self) -> &[usize] {
        &self.timesteps
    }

    pub fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        self.timesteps
            .iter()
            .enumerate()
            .map(move |(k, &t)| Transition {
                t,
                alpha_bar: self.alpha_bars[t],
                alpha_bar_prev: self
                    .timesteps
                    .get(k + 1)
                    .map_or(1.0, |&prev| self.alpha_bars[prev]),
            })
    }

    /// Overall gain `x_0 / z_T` of the sampler under the exact denoiser for
    /// standard-normal data. Writing `sqrt(alpha_bar) = cos(theta)`, every step
    /// rotates by the angle difference and contributes its cosine.
    pub fn identity_gain(&self) -> f64 {
        self.transitions()
            .map(|s| (s.alpha_bar.sqrt().acos() - s.alpha_bar_prev.sqrt().acos()).cos())
            .product()
    }
}
