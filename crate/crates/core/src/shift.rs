//! Channel mean shift: offsets that move a channel's positive ratio to a target.
//!
//! For a channel with `N = h * w` entries, a target shift `s` asks for
//! `k = round_half_up(count_positive + s * N)` strictly positive entries after
//! adding a constant `delta`. Rather than creeping `delta` upward in fixed
//! steps, the solver reads it straight off the order statistics: with values
//! sorted descending `v_1 >= ... >= v_N`, any `delta` in `[-v_{k+1}, -v_k)`
//! yields exactly `k` positives, and the midpoint of that interval is used.
//! Adding a constant leaves the channel's standard deviation untouched.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{positive_count, NoiseTensor};

/// Largest admissible |target shift| (exclusive).
pub const MAX_TARGET_SHIFT: f64 = 0.5;

/// Slack tolerated when checking that a target ratio lies in `[0, 1]`.
const RATIO_SLACK: f64 = 1e-12;

/// Offset used when the `k`-th and `(k+1)`-th order statistics coincide, or
/// when `k` hits either end of the range.
fn tie_offset(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

/// Per-channel target shifts (0-based channels) and, once resolved against a
/// tensor, the offsets that realize them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShiftPlan {
    entries: BTreeMap<usize, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resolved: Option<BTreeMap<usize, f64>>,
}

impl ShiftPlan {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds (or replaces) the target shift for `channel`. Invalidates any
    /// previous resolution.
    pub fn with_shift(mut self, channel: usize, target_shift: f64) -> Result<Self> {
        self.set_shift(channel, target_shift)?;
        Ok(self)
    }

    pub fn set_shift(&mut self, channel: usize, target_shift: f64) -> Result<()> {
        if !target_shift.is_finite() || target_shift.abs() >= MAX_TARGET_SHIFT {
            return Err(Error::invalid(format!(
                "target shift {target_shift} for channel {channel} must lie in (-0.5, 0.5)"
            )));
        }
        self.entries.insert(channel, target_shift);
        self.resolved = None;
        Ok(())
    }

    /// Plan carrying explicit offsets, bypassing the ratio solve.
    pub fn from_deltas(deltas: impl IntoIterator<Item = (usize, f64)>) -> Self {
        Self {
            entries: BTreeMap::new(),
            resolved: Some(deltas.into_iter().collect()),
        }
    }

    pub fn entries(&self) -> &BTreeMap<usize, f64> {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_resolved(&self) -> bool {
        self.resolved.is_some()
    }

    /// Resolved offsets, if any. Channels without an entry are implicitly 0.
    pub fn deltas(&self) -> Option<&BTreeMap<usize, f64>> {
        self.resolved.as_ref()
    }

    /// Solves every planned channel against `t`.
    pub fn resolve<T: Scalar>(&self, t: &NoiseTensor<T>) -> Result<ShiftPlan> {
        let mut resolved = BTreeMap::new();
        for (&channel, &shift) in &self.entries {
            resolved.insert(channel, solve_channel_shift(t, channel, shift)?);
        }
        Ok(ShiftPlan {
            entries: self.entries.clone(),
            resolved: Some(resolved),
        })
    }
}

/// Number of positives a target shift asks for (round half up, clamped to `[0, N]`).
pub fn target_positive_count(current: usize, n: usize, target_shift: f64) -> usize {
    let k = (current as f64 + target_shift * n as f64 + 0.5).floor();
    k.clamp(0.0, n as f64) as usize
}

/// Offset `delta` such that exactly `k` entries of `channel + delta` are
/// strictly positive (at least `k` when tied values straddle the threshold).
///
/// The returned value is exactly representable in `T`, so adding it in `T`
/// reproduces the solved count.
pub fn solve_channel_shift<T: Scalar>(
    t: &NoiseTensor<T>,
    channel: usize,
    target_shift: f64,
) -> Result<f64> {
    t.check_channel(channel)?;
    if !target_shift.is_finite() {
        return Err(Error::invalid("target shift must be finite"));
    }
    let n = t.pixels();
    let current = positive_count(t, channel);
    let target_ratio = current as f64 / n as f64 + target_shift;
    if !(-RATIO_SLACK..=1.0 + RATIO_SLACK).contains(&target_ratio) {
        return Err(Error::UnsatisfiableTarget {
            channel,
            target_ratio,
        });
    }
    let k = target_positive_count(current, n, target_shift);
    if k == current {
        return Ok(0.0);
    }

    let mut sorted: Vec<T> = t.channel(channel).collect();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("tensor values are finite"));
    // 1-based order statistic v_r.
    let order = |r: usize| sorted[r - 1];

    let delta = if k == 0 {
        let v1 = order(1).as_f64();
        -v1 - tie_offset(v1)
    } else if k == n {
        let vn = order(n).as_f64();
        -vn + tie_offset(vn)
    } else if order(k) == order(k + 1) {
        let vk = order(k).as_f64();
        -vk + tie_offset(vk)
    } else {
        -(order(k).as_f64() + order(k + 1).as_f64()) / 2.0
    };

    let mut delta_t = T::from_f64_lossy(delta);
    let distinct = k > 0 && k < n && order(k) != order(k + 1);
    if distinct {
        let hits = sorted.iter().filter(|v| **v + delta_t > T::zero()).count();
        if hits != k {
            // The midpoint rounded onto one of the neighbours; the lower end
            // of the interval is always exact: v_{k+1} - v_{k+1} = 0 and
            // v_k - v_{k+1} > 0 for distinct floats.
            delta_t = -order(k + 1);
        }
    }
    Ok(delta_t.as_f64())
}

/// `z + delta_c` on every planned channel; other channels are copied bitwise.
pub fn apply_shift<T: Scalar>(t: &NoiseTensor<T>, plan: &ShiftPlan) -> Result<NoiseTensor<T>> {
    let deltas = plan.deltas().ok_or(Error::UnresolvedPlan)?;
    let channels = t.channels();
    let mut offsets = vec![None; channels];
    for (&c, &d) in deltas {
        t.check_channel(c)?;
        if d != 0.0 {
            offsets[c] = Some(T::from_f64_lossy(d));
        }
    }
    let mut values = t.values().to_vec();
    for (idx, v) in values.iter_mut().enumerate() {
        if let Some(d) = offsets[idx % channels] {
            *v = *v + d;
        }
    }
    NoiseTensor::from_values(t.height(), t.width(), channels, values, None)
}
