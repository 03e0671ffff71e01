//! Latent noise tensors and their per-channel statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::NormalStream;
use crate::scalar::Scalar;

/// Default latent channel count of Stable-Diffusion-class autoencoders.
pub const DEFAULT_CHANNELS: usize = 4;

/// An `height x width x channels` field stored row-major, channel-last:
/// element `(i, j, c)` lives at `(i * width + j) * channels + c`.
///
/// Every value is finite. `seed` is `Some` only for tensors sampled directly
/// from a seed; anything computed from other tensors is `None` ("derived").
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTensor<T> {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<T>,
    seed: Option<u64>,
}

pub(crate) fn checked_len(h: usize, w: usize, c: usize) -> Result<usize> {
    if h == 0 || w == 0 || c == 0 {
        return Err(Error::invalid(format!(
            "tensor dimensions must be positive, got {h}x{w}x{c}"
        )));
    }
    h.checked_mul(w)
        .and_then(|n| n.checked_mul(c))
        .ok_or_else(|| Error::invalid(format!("tensor dimensions {h}x{w}x{c} overflow")))
}

impl<T: Scalar> NoiseTensor<T> {
    pub fn from_values(
        height: usize,
        width: usize,
        channels: usize,
        values: Vec<T>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let len = checked_len(height, width, channels)?;
        if values.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "expected {len} values for {height}x{width}x{channels}, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at flat index {pos}"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            values,
            seed,
        })
    }

    /// Tensor with every element equal to `value`.
    pub fn filled(height: usize, width: usize, channels: usize, value: T) -> Result<Self> {
        let len = checked_len(height, width, channels)?;
        Self::from_values(height, width, channels, vec![value; len], None)
    }

    /// Constructor for internal callers that already uphold the invariants.
    pub(crate) fn derived_unchecked(
        height: usize,
        width: usize,
        channels: usize,
        values: Vec<T>,
    ) -> Self {
        debug_assert_eq!(values.len(), height * width * channels);
        Self {
            height,
            width,
            channels,
            values,
            seed: None,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    /// Number of spatial positions, `height * width`.
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, c: usize) -> usize {
        (i * self.width + j) * self.channels + c
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, c: usize) -> T {
        self.values[self.index(i, j, c)]
    }

    /// Values of channel `c` in row-major pixel order.
    pub fn channel(&self, c: usize) -> impl ExactSizeIterator<Item = T> + '_ {
        assert!(c < self.channels, "channel {c} out of range");
        self.values.iter().skip(c).step_by(self.channels).copied()
    }

    pub(crate) fn check_channel(&self, c: usize) -> Result<()> {
        if c >= self.channels {
            return Err(Error::invalid(format!(
                "channel {c} out of range for a {}-channel tensor",
                self.channels
            )));
        }
        Ok(())
    }

    /// Same values in another scalar type (rounded to nearest).
    pub fn cast<U: Scalar>(&self) -> Result<NoiseTensor<U>> {
        let values = self
            .values
            .iter()
            .map(|v| U::from_f64_lossy(v.as_f64()))
            .collect();
        NoiseTensor::from_values(self.height, self.width, self.channels, values, self.seed)
    }
}

/// Draws an `h x w x c` tensor of independent standard normals.
///
/// Bitwise reproducible for equal `(seed, h, w, c)`; channel `c` of a tensor
/// is the same regardless of how many channels the tensor has.
pub fn sample_standard_noise<T: Scalar>(
    seed: u64,
    h: usize,
    w: usize,
    c: usize,
) -> Result<NoiseTensor<T>> {
    let len = checked_len(h, w, c)?;
    let mut values = vec![T::zero(); len];
    for ch in 0..c {
        let mut stream = NormalStream::new(seed, ch);
        for slot in values.iter_mut().skip(ch).step_by(c) {
            *slot = T::from_f64_lossy(stream.next_normal());
        }
    }
    NoiseTensor::from_values(h, w, c, values, Some(seed))
}

/// Summary of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub channel: usize,
    pub mean: f64,
    /// Population standard deviation (divisor N).
    pub std: f64,
    /// Number of entries strictly greater than zero.
    pub positive_count: usize,
    /// `positive_count / N`, N = height * width.
    pub positive_ratio: f64,
}

pub fn channel_stats<T: Scalar>(t: &NoiseTensor<T>) -> Vec<ChannelStats> {
    (0..t.channels()).map(|c| stats_for_channel(t, c)).collect()
}

pub(crate) fn stats_for_channel<T: Scalar>(t: &NoiseTensor<T>, c: usize) -> ChannelStats {
    let n = t.pixels() as f64;
    let mut sum = 0.0;
    let mut positive_count = 0usize;
    for v in t.channel(c) {
        sum += v.as_f64();
        if v > T::zero() {
            positive_count += 1;
        }
    }
    let mean = sum / n;
    let mut sq = 0.0;
    for v in t.channel(c) {
        let d = v.as_f64() - mean;
        sq += d * d;
    }
    ChannelStats {
        channel: c,
        mean,
        std: (sq / n).sqrt(),
        positive_count,
        positive_ratio: positive_count as f64 / n,
    }
}

/// Count of strictly positive entries in channel `c`.
pub fn positive_count<T: Scalar>(t: &NoiseTensor<T>, c: usize) -> usize {
    t.channel(c).filter(|v| *v > T::zero()).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_is_deterministic() {
        let a = sample_standard_noise::<f32>(7, 1, 1, 1).unwrap();
        let b = sample_standard_noise::<f32>(7, 1, 1, 1).unwrap();
        assert_eq!(a.values()[0].to_bits(), b.values()[0].to_bits());
        assert_eq!(a.seed(), Some(7));
    }

    #[test]
    fn moments_of_seeded_noise() {
        let t = sample_standard_noise::<f32>(7, 64, 64, 4).unwrap();
        for s in channel_stats(&t) {
            assert!(s.mean.abs() <= 4.0 / 4096f64.sqrt(), "mean {}", s.mean);
            assert!((s.std - 1.0).abs() <= 0.05, "std {}", s.std);
        }
    }

    #[test]
    fn distinct_seeds_give_distinct_tensors() {
        let a = sample_standard_noise::<f32>(7, 64, 64, 4).unwrap();
        let b = sample_standard_noise::<f32>(8, 64, 64, 4).unwrap();
        assert_ne!(a.values(), b.values());
    }

    #[test]
    fn channel_independent_of_channel_count() {
        let a = sample_standard_noise::<f64>(5, 8, 8, 1).unwrap();
        let b = sample_standard_noise::<f64>(5, 8, 8, 4).unwrap();
        assert!(a.channel(0).eq(b.channel(0)));
    }

    #[test]
    fn zero_and_overflowing_dimensions_rejected() {
        assert!(matches!(
            sample_standard_noise::<f32>(1, 0, 4, 4),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            sample_standard_noise::<f32>(1, usize::MAX, 2, 4),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn positive_ratio_uses_strict_inequality() {
        let ones = NoiseTensor::filled(4, 4, 1, 1.0f32).unwrap();
        assert_eq!(channel_stats(&ones)[0].positive_ratio, 1.0);
        let zeros = NoiseTensor::filled(4, 4, 1, 0.0f32).unwrap();
        assert_eq!(channel_stats(&zeros)[0].positive_ratio, 0.0);
    }

    #[test]
    fn non_finite_values_rejected() {
        let r = NoiseTensor::from_values(1, 2, 1, vec![0.0f32, f32::NAN], None);
        assert!(r.is_err());
        let r = NoiseTensor::from_values(1, 2, 1, vec![0.0f32], None);
        assert!(matches!(r, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn channel_last_layout() {
        let t =
            NoiseTensor::from_values(2, 2, 2, (0..8).map(|v| v as f64).collect(), None).unwrap();
        assert_eq!(t.get(1, 0, 1), 5.0);
        assert_eq!(t.channel(1).collect::<Vec<_>>(), vec![1.0, 3.0, 5.0, 7.0]);
    }
}
