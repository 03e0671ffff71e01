//! Run configuration shared by the command line and downstream consumers.

use serde::{Deserialize, Serialize};

use crate::color::{ColorPlan, ColorRegistry, DEFAULT_MAGNITUDE};
use crate::error::{Error, Result};
use crate::mask::MaskSpec;
use crate::sampler::SamplerConfig;
use crate::tensor::{checked_len, DEFAULT_CHANNELS};

pub const DEFAULT_COLOR: &str = "green";
pub const DEFAULT_COLOR_ENV: &str = "TKG_DEFAULT_COLOR";

/// Latent geometry of the target model family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentPreset {
    /// 512x512 images, 64x64x4 latents.
    #[default]
    Sd15,
    /// 1024x1024 images, 128x128x4 latents.
    Sdxl,
}

impl LatentPreset {
    pub fn dims(self) -> (usize, usize, usize) {
        match self {
            LatentPreset::Sd15 => (64, 64, DEFAULT_CHANNELS),
            LatentPreset::Sdxl => (128, 128, DEFAULT_CHANNELS),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Registry color name; mutually exclusive with `plan`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<ColorPlan>,
    pub magnitude: f64,
    /// Empty means one centered mask at the default spread.
    pub masks: Vec<MaskSpec>,
    pub preset: LatentPreset,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            color: None,
            plan: None,
            magnitude: DEFAULT_MAGNITUDE,
            masks: Vec::new(),
            preset: LatentPreset::Sd15,
            height: None,
            width: None,
            channels: None,
            sampler: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        let (h, w, c) = self.preset.dims();
        (
            self.height.unwrap_or(h),
            self.width.unwrap_or(w),
            self.channels.unwrap_or(c),
        )
    }

    pub fn effective_masks(&self) -> Vec<MaskSpec> {
        if self.masks.is_empty() {
            let (h, w, _) = self.dims();
            vec![MaskSpec::centered(h, w)]
        } else {
            self.masks.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.color.is_some() && self.plan.is_some() {
            return Err(Error::invalid("set either `color` or `plan`, not both"));
        }
        let (h, w, c) = self.dims();
        checked_len(h, w, c)?;
        for m in &self.masks {
            m.validate()?;
        }
        if !(self.magnitude > 0.0 && self.magnitude <= 0.5) {
            return Err(Error::invalid(format!(
                "magnitude {} must lie in (0, 0.5]",
                self.magnitude
            )));
        }
        if let Some(p) = &self.plan {
            p.validate()?;
            if let Some(&max) = p.shifts.keys().max() {
                if usize::from(max) > c {
                    return Err(Error::invalid(format!(
                        "plan uses channel {max} but tensors have {c}"
                    )));
                }
            }
        }
        if let Some(s) = &self.sampler {
            s.validate()?;
        }
        Ok(())
    }

    /// The explicit plan, or the named (else `default_color`) registry color.
    pub fn color_plan(&self, registry: &ColorRegistry, default_color: &str) -> Result<ColorPlan> {
        match &self.plan {
            Some(p) => {
                p.validate()?;
                Ok(p.clone())
            }
            None => registry.plan_for_color(
                self.color.as_deref().unwrap_or(default_color),
                self.magnitude,
            ),
        }
    }
}

/// Color name from `TKG_DEFAULT_COLOR`, falling back to green.
pub fn default_color_from_env() -> String {
    std::env::var(DEFAULT_COLOR_ENV)
        .ok()
        .filter(|s| !s.trim().is_empty())
        .unwrap_or_else(|| DEFAULT_COLOR.to_string())
}
