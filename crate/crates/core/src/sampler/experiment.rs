//! Desk-scale chroma-key run: shift scalar noise by `delta`, keep the
//! original noise under the mask, sample with a mixture oracle, and count
//! which mixture mode every pixel lands in per region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{blend, compose_masks, Mask, MaskSpec};
use crate::metrics::{border_ring_mask, mode_fraction, Region, DEFAULT_BORDER_FRACTION};
use crate::scalar::Scalar;
use crate::shift::{apply_shift, ShiftPlan};
use crate::tensor::{sample_standard_noise, NoiseTensor};

use super::{
    ddim_sample_with, mixture_oracle_denoiser, MixtureModel, NoiseSchedule, SamplerConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChromaExperiment {
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    /// Constant offset applied to the background noise.
    pub delta: f64,
    pub masks: Vec<MaskSpec>,
    /// Mixture component standing in for the key color.
    pub key_component: usize,
    #[serde(default = "default_border_fraction")]
    pub border_fraction: f64,
}

fn default_border_fraction() -> f64 {
    DEFAULT_BORDER_FRACTION
}

impl ChromaExperiment {
    pub fn new(height: usize, width: usize, seed: u64, delta: f64, key_component: usize) -> Self {
        Self {
            height,
            width,
            seed,
            delta,
            masks: vec![MaskSpec::centered(height, width)],
            key_component,
            border_fraction: DEFAULT_BORDER_FRACTION,
        }
    }

    pub fn with_masks(mut self, masks: Vec<MaskSpec>) -> Self {
        self.masks = masks;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome<T> {
    pub x0: NoiseTensor<T>,
    pub mask: Mask<T>,
    pub report: ExperimentReport,
}

/// Per-region mode fractions, indexed by mixture component. A region with
/// no pixels (e.g. the background under an all-ones mask) is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ChromaExperiment,
    pub sampler: SamplerConfig,
    pub mixture: MixtureModel,
    /// `x_0 / z_T` gain of this schedule for standard-normal data.
    pub identity_gain: f64,
    /// Mask >= 0.5.
    pub foreground: Option<Vec<f64>>,
    /// Mask < 0.5.
    pub background: Option<Vec<f64>>,
    /// Edge ring of width `ceil(border_fraction * min(h, w))`.
    pub border: Vec<f64>,
}

impl ExperimentReport {
    pub fn border_key_fraction(&self) -> f64 {
        self.border[self.experiment.key_component]
    }

    pub fn foreground_key_fraction(&self) -> Option<f64> {
        self.foreground
            .as_ref()
            .map(|f| f[self.experiment.key_component])
    }

    pub fn background_key_fraction(&self) -> Option<f64> {
        self.background
            .as_ref()
            .map(|f| f[self.experiment.key_component])
    }
}

fn optional_region(r: Result<Vec<f64>>) -> Result<Option<Vec<f64>>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::EmptyRegion(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn run_chroma_experiment<T: Scalar>(
    exp: &ChromaExperiment,
    mixture: &MixtureModel,
    cfg: &SamplerConfig,
) -> Result<ExperimentOutcome<T>> {
    if mixture.len() < 2 {
        return Err(Error::invalid(
            "experiment mixture needs a key mode and at least one content mode",
        ));
    }
    if exp.key_component >= mixture.len() {
        return Err(Error::invalid(format!(
            "key component {} out of range for {} components",
            exp.key_component,
            mixture.len()
        )));
    }
    if !exp.delta.is_finite() {
        return Err(Error::invalid("delta must be finite"));
    }
    let schedule = NoiseSchedule::new(cfg)?;
    let z = sample_standard_noise::<T>(exp.seed, exp.height, exp.width, 1)?;
    let z_star = apply_shift(&z, &ShiftPlan::from_deltas([(0, exp.delta)]))?;
    let mask = compose_masks::<T>(&exp.masks, exp.height, exp.width)?;
    let z_key = blend(&z, &z_star, &mask)?;
    let x0 = ddim_sample_with(&mixture_oracle_denoiser(mixture.clone()), &z_key, &schedule)?;

    let half = T::from_f64_lossy(0.5);
    let ring = border_ring_mask::<T>(exp.height, exp.width, exp.border_fraction)?;
    let report = ExperimentReport {
        experiment: exp.clone(),
        sampler: *cfg,
        mixture: mixture.clone(),
        identity_gain: schedule.identity_gain(),
        foreground: optional_region(mode_fraction(&x0, mixture, &mask, half, Region::Foreground))?,
        background: optional_region(mode_fraction(&x0, mixture, &mask, half, Region::Background))?,
        border: mode_fraction(&x0, mixture, &ring, half, Region::Foreground)?,
    };
    Ok(ExperimentOutcome { x0, mask, report })
}
