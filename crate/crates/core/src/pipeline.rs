//! End-to-end chroma-key noise construction:
//! sample, solve channel shifts, shift, build masks, blend.

use serde_json::{json, Value};

use crate::color::{ColorPlan, ColorRegistry};
use crate::config::RunConfig;
use crate::error::Result;
use crate::mask::{blend, compose_masks, Mask, MaskSpec};
use crate::scalar::Scalar;
use crate::shift::{apply_shift, ShiftPlan};
use crate::tensor::{sample_standard_noise, NoiseTensor};

#[derive(Debug, Clone)]
pub struct PipelineOutput<T> {
    pub color: ColorPlan,
    /// Resolved against `noise`.
    pub shift_plan: ShiftPlan,
    pub masks: Vec<MaskSpec>,
    pub noise: NoiseTensor<T>,
    pub color_noise: NoiseTensor<T>,
    pub mask: Mask<T>,
    pub keyed: NoiseTensor<T>,
}

pub fn run_pipeline<T: Scalar>(
    cfg: &RunConfig,
    registry: &ColorRegistry,
    default_color: &str,
) -> Result<PipelineOutput<T>> {
    cfg.validate()?;
    let (h, w, c) = cfg.dims();
    let color = cfg.color_plan(registry, default_color)?;
    let noise = sample_standard_noise::<T>(cfg.seed, h, w, c)?;
    let shift_plan = color.to_shift_plan()?.resolve(&noise)?;
    let color_noise = apply_shift(&noise, &shift_plan)?;
    let masks = cfg.effective_masks();
    let mask = compose_masks::<T>(&masks, h, w)?;
    let keyed = blend(&noise, &color_noise, &mask)?;
    Ok(PipelineOutput {
        color,
        shift_plan,
        masks,
        noise,
        color_noise,
        mask,
        keyed,
    })
}

impl<T> PipelineOutput<T> {
    /// Provenance record stored alongside the keyed tensor.
    pub fn metadata(&self, cfg: &RunConfig) -> Value {
        json!({
            "kind": "keyed_noise",
            "source_seed": cfg.seed,
            "color": self.color,
            "shift_plan": self.shift_plan,
            "masks": self.masks,
            "config": cfg,
        })
    }
}
