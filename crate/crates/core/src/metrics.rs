//! Background quality measures for generated images and toy sampler fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::mask::Mask;
use crate::sampler::MixtureModel;
use crate::scalar::Scalar;
use crate::tensor::NoiseTensor;

pub const DEFAULT_BORDER_FRACTION: f64 = 0.1;
pub const DEFAULT_TOLERANCE: u8 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub target_rgb: [u8; 3],
    pub border_fraction: f64,
    pub tolerance: u8,
    /// Ring thickness in pixels.
    pub ring_width: usize,
    pub ring_pixels: usize,
    pub passing_pixels: usize,
    pub pass_fraction: f64,
    pub mean_border_rgb: [f64; 3],
    /// Largest per-channel absolute deviation over the ring.
    pub max_deviation: u8,
}

fn ring_width(h: usize, w: usize, b: f64) -> Result<usize> {
    if !(b > 0.0 && b < 0.5) {
        return Err(Error::invalid(format!(
            "border fraction {b} must lie in (0, 0.5)"
        )));
    }
    Ok((b * h.min(w) as f64).ceil() as usize)
}

#[inline]
fn in_ring(i: usize, j: usize, h: usize, w: usize, width: usize) -> bool {
    i.min(j).min(h - 1 - i).min(w - 1 - j) < width
}

/// Mask with weight 1 on the edge ring of thickness `ceil(b * min(h, w))`, 0 inside.
pub fn border_ring_mask<T: Scalar>(h: usize, w: usize, b: f64) -> Result<Mask<T>> {
    let width = ring_width(h, w, b)?;
    let mut values = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            values.push(if in_ring(i, j, h, w, width) {
                T::one()
            } else {
                T::zero()
            });
        }
    }
    Mask::from_values(h, w, values)
}

/// Fraction of edge-ring pixels whose every channel is within `tau` of `target_rgb`.
pub fn border_uniformity(
    image: &RgbImage,
    target_rgb: [u8; 3],
    b: f64,
    tau: u8,
) -> Result<UniformityReport> {
    let (h, w) = (image.height, image.width);
    if h < 3 || w < 3 {
        return Err(Error::invalid(format!(
            "image {w}x{h} too small for a border ring"
        )));
    }
    let width = ring_width(h, w, b)?;
    let mut ring_pixels = 0usize;
    let mut passing = 0usize;
    let mut sums = [0u64; 3];
    let mut max_dev = 0u8;
    for i in 0..h {
        for j in 0..w {
            if !in_ring(i, j, h, w, width) {
                continue;
            }
            let px = image.get(i, j);
            let dev = (0..3)
                .map(|c| px[c].abs_diff(target_rgb[c]))
                .max()
                .unwrap_or(0);
            ring_pixels += 1;
            if dev <= tau {
                passing += 1;
            }
            max_dev = max_dev.max(dev);
            for c in 0..3 {
                sums[c] += u64::from(px[c]);
            }
        }
    }
    let n = ring_pixels as f64;
    Ok(UniformityReport {
        target_rgb,
        border_fraction: b,
        tolerance: tau,
        ring_width: width,
        ring_pixels,
        passing_pixels: passing,
        pass_fraction: passing as f64 / n,
        mean_border_rgb: sums.map(|s| s as f64 / n),
        max_deviation: max_dev,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Mask >= threshold.
    Foreground,
    /// Mask < threshold.
    Background,
}

/// Share of region elements assigned to each mixture component by nearest
/// mean (ties to the lower index). Every channel at a pixel counts.
pub fn mode_fraction<T: Scalar>(
    field: &NoiseTensor<T>,
    mixture: &MixtureModel,
    region_mask: &Mask<T>,
    threshold: T,
    region: Region,
) -> Result<Vec<f64>> {
    if (field.height(), field.width()) != (region_mask.height(), region_mask.width()) {
        return Err(Error::ShapeMismatch(format!(
            "field is {}x{} but mask is {}x{}",
            field.height(),
            field.width(),
            region_mask.height(),
            region_mask.width()
        )));
    }
    let c = field.channels();
    let mut counts = vec![0usize; mixture.len()];
    let mut total = 0usize;
    for (p, &a) in region_mask.values().iter().enumerate() {
        let inside = match region {
            Region::Foreground => a >= threshold,
            Region::Background => a < threshold,
        };
        if !inside {
            continue;
        }
        for &v in &field.values()[p * c..(p + 1) * c] {
            counts[mixture.nearest_component(v.as_f64())] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyRegion(format!(
            "{region:?} region has no pixels"
        )));
    }
    Ok(counts
        .into_iter()
        .map(|k| k as f64 / total as f64)
        .collect())
}
