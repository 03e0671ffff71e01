//! Noise predictors with closed-form answers for analytic data distributions.
//!
//! For data `x_0 ~ N(m, s^2)` and `x_t = sqrt(a) x_0 + sqrt(1 - a) eps`, the
//! minimum-MSE noise prediction is
//! `eps_hat = sqrt(1 - a) (x_t - sqrt(a) m) / (a s^2 + 1 - a)`.
//! A Gaussian mixture mixes the per-component predictions with posterior
//! responsibilities `r_k ~ w_k N(x_t; sqrt(a) m_k, a s_k^2 + 1 - a)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Timestep handed to a denoiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timestep {
    pub index: usize,
    pub alpha_bar: f64,
}

/// Noise predictor over a whole field. Output has the input's length.
pub trait Denoiser<T: Scalar> {
    fn predict_noise(&self, sample: &[T], t: Timestep) -> Vec<T>;
}

/// Denoiser acting independently on every element.
pub trait PixelDenoiser<T: Scalar> {
    fn epsilon(&self, x: T, alpha_bar: f64) -> T;
}

impl<T: Scalar, P: PixelDenoiser<T>> Denoiser<T> for P {
    fn predict_noise(&self, sample: &[T], t: Timestep) -> Vec<T> {
        sample
            .iter()
            .map(|&x| self.epsilon(x, t.alpha_bar))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianOracle {
    pub mean: f64,
    pub std: f64,
}

pub fn gaussian_oracle_denoiser(mean: f64, std: f64) -> Result<GaussianOracle> {
    if !std.is_finite() || !mean.is_finite() || std <= 0.0 {
        return Err(Error::invalid(format!(
            "gaussian oracle needs finite mean and std > 0, got {mean}, {std}"
        )));
    }
    Ok(GaussianOracle { mean, std })
}

impl<T: Scalar> PixelDenoiser<T> for GaussianOracle {
    fn epsilon(&self, x: T, alpha_bar: f64) -> T {
        let a = alpha_bar;
        let gain = T::from_f64_lossy((1.0 - a).sqrt() / (a * self.std * self.std + 1.0 - a));
        let center = T::from_f64_lossy(a.sqrt() * self.mean);
        gain * (x - center)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

/// Independent per-pixel scalar data distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MixtureComponent>", into = "Vec<MixtureComponent>")]
pub struct MixtureModel {
    components: Vec<MixtureComponent>,
}

impl MixtureModel {
    /// Normalizes the weights; rejects negative weights, a zero total, or
    /// non-positive spreads.
    pub fn new(mut components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        for c in &components {
            let finite = c.weight.is_finite() && c.mean.is_finite() && c.std.is_finite();
            if !finite || c.weight < 0.0 || c.std <= 0.0 {
                return Err(Error::invalid(format!("invalid mixture component {c:?}")));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if total <= 0.0 || total.is_nan() {
            return Err(Error::invalid("mixture weights sum to zero"));
        }
        for c in &mut components {
            c.weight /= total;
        }
        Ok(Self { components })
    }

    /// Two equal-weight modes at `-m` and `+m` (component 1 is `+m`).
    pub fn symmetric_bimodal(m: f64, std: f64) -> Result<Self> {
        Self::new(vec![
            MixtureComponent {
                weight: 0.5,
                mean: -m,
                std,
            },
            MixtureComponent {
                weight: 0.5,
                mean: m,
                std,
            },
        ])
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Component with the nearest mean; ties go to the lower index.
    pub fn nearest_component(&self, x: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (k, c) in self.components.iter().enumerate() {
            let d = (x - c.mean).abs();
            if d < best_dist {
                best = k;
                best_dist = d;
            }
        }
        best
    }
}

impl TryFrom<Vec<MixtureComponent>> for MixtureModel {
    type Error = Error;

    fn try_from(v: Vec<MixtureComponent>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MixtureModel> for Vec<MixtureComponent> {
    fn from(m: MixtureModel) -> Self {
        m.components
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureOracle {
    model: MixtureModel,
}

pub fn mixture_oracle_denoiser(model: MixtureModel) -> MixtureOracle {
    MixtureOracle { model }
}

impl MixtureOracle {
    pub fn model(&self) -> &MixtureModel {
        &self.model
    }
}

impl<T: Scalar> PixelDenoiser<T> for MixtureOracle {
    fn epsilon(&self, x: T, alpha_bar: f64) -> T {
        let a = alpha_bar;
        let sqrt_a = a.sqrt();
        let sqrt_1ma = (1.0 - a).sqrt();
        let half = T::from_f64_lossy(0.5);

        // Log responsibilities (up to a shared constant) and per-component predictions.
        let mut logits = Vec::with_capacity(self.model.len());
        let mut eps = Vec::with_capacity(self.model.len());
        for c in self.model.components() {
            let var = a * c.std * c.std + 1.0 - a;
            let diff = x - T::from_f64_lossy(sqrt_a * c.mean);
            let var_t = T::from_f64_lossy(var);
            let log_norm = T::from_f64_lossy(c.weight.ln() - 0.5 * var.ln());
            logits.push(log_norm - half * diff * diff / var_t);
            eps.push(T::from_f64_lossy(sqrt_1ma) * diff / var_t);
        }
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let mut num = T::zero();
        let mut den = T::zero();
        for (l, e) in logits.iter().zip(&eps) {
            let r = (*l - max).exp();
            num = num + r * *e;
            den = den + r;
        }
        num / den
    }
}
