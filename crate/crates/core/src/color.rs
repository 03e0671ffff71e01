//! Named background colors expressed as signed per-channel positive-ratio shifts.
//!
//! Channels here use 1-based latent numbering (1..=4). Known hue responses:
//! channel 2 up is cyan, channel 3 up is yellow, channel 2 down is red,
//! channel 3 down is blue-purple; channels 1 and 4 mostly move luminance.
//! Mixing follows additive/subtractive color intuition (cyan + yellow =
//! green; red + yellow at reduced luminance = orange).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shift::ShiftPlan;

pub const DEFAULT_MAGNITUDE: f64 = 0.07;

/// Lime green chroma key reference color.
pub const LIME_GREEN: [u8; 3] = [50, 205, 50];

pub const LATENT_CHANNELS: u8 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorPlan {
    pub name: String,
    /// 1-based channel -> signed target shift fraction (0.07 = +7%).
    pub shifts: BTreeMap<u8, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swatch_rgb: Option<[u8; 3]>,
}

impl ColorPlan {
    pub fn validate(&self) -> Result<()> {
        if self.shifts.is_empty() {
            return Err(Error::invalid(format!(
                "color plan `{}` has no channel shifts",
                self.name
            )));
        }
        for (&ch, &s) in &self.shifts {
            if !(1..=LATENT_CHANNELS).contains(&ch) {
                return Err(Error::invalid(format!(
                    "color plan `{}`: channel {ch} outside 1..={LATENT_CHANNELS}",
                    self.name
                )));
            }
            if !s.is_finite() || s.abs() > 0.5 {
                return Err(Error::invalid(format!(
                    "color plan `{}`: shift {s} on channel {ch} exceeds 0.5 in magnitude",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Converts to 0-based channels. The plan is left unresolved.
    pub fn to_shift_plan(&self) -> Result<ShiftPlan> {
        self.validate()?;
        let mut plan = ShiftPlan::new();
        for (&ch, &s) in &self.shifts {
            plan.set_shift(usize::from(ch - 1), s)?;
        }
        Ok(plan)
    }
}

/// Registry entry: per-channel weights, scaled by the requested magnitude.
#[derive(Debug, Clone, PartialEq)]
struct ColorEntry {
    weights: BTreeMap<u8, f64>,
    swatch_rgb: Option<[u8; 3]>,
}

/// One color in the JSON registry file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ColorFileEntry {
    Detailed {
        shifts: BTreeMap<String, f64>,
        #[serde(default)]
        swatch_rgb: Option<[u8; 3]>,
    },
    Shifts(BTreeMap<String, f64>),
}

fn parse_channel_keys(name: &str, raw: BTreeMap<String, f64>) -> Result<BTreeMap<u8, f64>> {
    raw.into_iter()
        .map(|(k, v)| {
            k.trim().parse::<u8>().map(|c| (c, v)).map_err(|_| {
                Error::invalid(format!(
                    "color `{name}`: channel key `{k}` is not a channel number"
                ))
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorRegistry {
    entries: BTreeMap<String, ColorEntry>,
}

impl Default for ColorRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ColorRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        let mut add = |name: &str, weights: &[(u8, f64)], swatch: Option<[u8; 3]>| {
            reg.entries.insert(
                name.to_string(),
                ColorEntry {
                    weights: weights.iter().copied().collect(),
                    swatch_rgb: swatch,
                },
            );
        };
        add("green", &[(2, 1.0), (3, 1.0)], Some(LIME_GREEN));
        add("cyan", &[(2, 1.0)], None);
        add("yellow", &[(3, 1.0)], None);
        add("red", &[(2, -1.0)], None);
        add("blue_purple", &[(3, -1.0)], None);
        add("orange", &[(1, -1.0), (2, -1.0), (3, 1.0)], None);
        reg
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    /// Adds or replaces `name`. Shifts are given at [`DEFAULT_MAGNITUDE`].
    pub fn insert(
        &mut self,
        name: &str,
        shifts: BTreeMap<u8, f64>,
        swatch_rgb: Option<[u8; 3]>,
    ) -> Result<()> {
        let plan = ColorPlan {
            name: name.to_string(),
            shifts,
            swatch_rgb,
        };
        plan.validate()?;
        let weights = plan
            .shifts
            .iter()
            .map(|(&c, &s)| (c, s / DEFAULT_MAGNITUDE))
            .collect();
        self.entries.insert(
            plan.name,
            ColorEntry {
                weights,
                swatch_rgb,
            },
        );
        Ok(())
    }

    /// Parses a JSON document `{ "name": { "2": 0.07, ... }, ... }` (or
    /// `{ "name": { "shifts": {...}, "swatch_rgb": [r, g, b] } }`) and merges
    /// it over this registry.
    pub fn merge_json(&mut self, json: &str) -> Result<()> {
        let doc: BTreeMap<String, ColorFileEntry> = serde_json::from_str(json)?;
        for (name, entry) in doc {
            let (shifts, swatch) = match entry {
                ColorFileEntry::Detailed { shifts, swatch_rgb } => (shifts, swatch_rgb),
                ColorFileEntry::Shifts(shifts) => (shifts, None),
            };
            let shifts = parse_channel_keys(&name, shifts)?;
            self.insert(&name, shifts, swatch)?;
        }
        Ok(())
    }

    /// Built-in colors overlaid with the entries in `path`.
    pub fn load(path: &Path) -> Result<Self> {
        let mut reg = Self::builtin();
        reg.merge_json(&fs::read_to_string(path)?)?;
        Ok(reg)
    }

    pub fn plan_for_color(&self, name: &str, magnitude: f64) -> Result<ColorPlan> {
        if !(magnitude > 0.0 && magnitude <= 0.5) {
            return Err(Error::invalid(format!(
                "magnitude {magnitude} must lie in (0, 0.5]"
            )));
        }
        let entry = self.entries.get(name).ok_or_else(|| Error::UnknownColor {
            name: name.to_string(),
            available: self.names(),
        })?;
        let plan = ColorPlan {
            name: name.to_string(),
            shifts: entry
                .weights
                .iter()
                .map(|(&c, &w)| (c, w * magnitude))
                .collect(),
            swatch_rgb: entry.swatch_rgb,
        };
        plan.validate()?;
        Ok(plan)
    }
}

/// Looks `name` up in the built-in registry.
pub fn plan_for_color(name: &str, magnitude: f64) -> Result<ColorPlan> {
    ColorRegistry::builtin().plan_for_color(name, magnitude)
}
