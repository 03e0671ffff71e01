//! Gaussian blend masks and masked mixing of original and color-shifted noise.
//!
//! A mask weight of 1 keeps the original noise (foreground), 0 takes the
//! shifted noise (background).
//!
//! `sigma` is normalized: the pixel-space spread is `sigma * min(h, w) / 2`,
//! so the default `sigma = 0.5` on a square latent puts the corners at
//! `exp(-4)`. Very small `sigma` shrinks the foreground window until the
//! sampler has nothing left to draw an object into; no lower bound is
//! enforced.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{checked_len, NoiseTensor};

/// Default normalized spread.
pub const DEFAULT_SIGMA: f64 = 0.5;

/// Center (latent-pixel units, may lie off-canvas) and normalized spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSpec {
    pub mu_i: f64,
    pub mu_j: f64,
    pub sigma: f64,
}

impl MaskSpec {
    pub fn new(mu_i: f64, mu_j: f64, sigma: f64) -> Result<Self> {
        let spec = Self { mu_i, mu_j, sigma };
        spec.validate()?;
        Ok(spec)
    }

    /// Default layout: one mask centered on the latent.
    pub fn centered(h: usize, w: usize) -> Self {
        Self {
            mu_i: h as f64 / 2.0,
            mu_j: w as f64 / 2.0,
            sigma: DEFAULT_SIGMA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(Error::invalid(format!(
                "mask sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !self.mu_i.is_finite() || !self.mu_j.is_finite() {
            return Err(Error::invalid("mask center must be finite"));
        }
        Ok(())
    }

    /// Spread in pixels for an `h x w` canvas.
    pub fn sigma_px(&self, h: usize, w: usize) -> f64 {
        self.sigma * h.min(w) as f64 / 2.0
    }
}

/// Blend weights `A(i, j)` in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask<T> {
    height: usize,
    width: usize,
    values: Vec<T>,
}

impl<T: Scalar> Mask<T> {
    pub fn from_values(height: usize, width: usize, values: Vec<T>) -> Result<Self> {
        let len = checked_len(height, width, 1)?;
        if values.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "expected {len} mask values for {height}x{width}, got {}",
                values.len()
            )));
        }
        if values.iter().any(|a| !(*a >= T::zero() && *a <= T::one())) {
            return Err(Error::invalid("mask values must lie in [0, 1]"));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn constant(height: usize, width: usize, value: T) -> Result<Self> {
        let len = checked_len(height, width, 1)?;
        Self::from_values(height, width, vec![value; len])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.width + j]
    }
}

/// `A(i, j) = exp(-((i - mu_i)^2 + (j - mu_j)^2) / (2 sigma_px^2))` at integer pixel centers.
pub fn gaussian_mask<T: Scalar>(spec: &MaskSpec, h: usize, w: usize) -> Result<Mask<T>> {
    spec.validate()?;
    let len = checked_len(h, w, 1)?;
    let sigma_px = spec.sigma_px(h, w);
    let denom = 2.0 * sigma_px * sigma_px;
    let mut values = Vec::with_capacity(len);
    for i in 0..h {
        let di = i as f64 - spec.mu_i;
        for j in 0..w {
            let dj = j as f64 - spec.mu_j;
            values.push(T::from_f64_lossy((-(di * di + dj * dj) / denom).exp()));
        }
    }
    Ok(Mask {
        height: h,
        width: w,
        values,
    })
}

/// Pointwise maximum of the individual masks.
pub fn compose_masks<T: Scalar>(specs: &[MaskSpec], h: usize, w: usize) -> Result<Mask<T>> {
    let (first, rest) = specs
        .split_first()
        .ok_or_else(|| Error::invalid("at least one mask spec is required"))?;
    let mut out = gaussian_mask::<T>(first, h, w)?;
    for spec in rest {
        let m = gaussian_mask::<T>(spec, h, w)?;
        for (a, b) in out.values.iter_mut().zip(m.values) {
            *a = a.max(b);
        }
    }
    Ok(out)
}

/// `A * z + (1 - A) * z_star` per pixel, applied to every channel.
///
/// `A = 1` returns `z` and `A = 0` returns `z_star` bit for bit; elsewhere the
/// result is clamped into `[min(z, z*), max(z, z*)]` against rounding.
pub fn blend<T: Scalar>(
    z: &NoiseTensor<T>,
    z_star: &NoiseTensor<T>,
    mask: &Mask<T>,
) -> Result<NoiseTensor<T>> {
    if z.shape() != z_star.shape() {
        return Err(Error::ShapeMismatch(format!(
            "noise shapes differ: {:?} vs {:?}",
            z.shape(),
            z_star.shape()
        )));
    }
    if (z.height(), z.width()) != (mask.height(), mask.width()) {
        return Err(Error::ShapeMismatch(format!(
            "mask is {}x{} but noise is {}x{}",
            mask.height(),
            mask.width(),
            z.height(),
            z.width()
        )));
    }
    let c = z.channels();
    let mut values = Vec::with_capacity(z.values().len());
    for (p, &a) in mask.values().iter().enumerate() {
        let base = p * c;
        for k in base..base + c {
            let (fg, bg) = (z.values()[k], z_star.values()[k]);
            let v = if a == T::one() {
                fg
            } else if a == T::zero() {
                bg
            } else {
                (a * fg + (T::one() - a) * bg)
                    .max(fg.min(bg))
                    .min(fg.max(bg))
            };
            values.push(v);
        }
    }
    Ok(NoiseTensor::derived_unchecked(
        z.height(),
        z.width(),
        c,
        values,
    ))
}
