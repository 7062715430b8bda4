//! Interface layouts and per-layout unit time costs.
//!
//! A timing profile holds three layout-independent costs (starting a batch,
//! triggering a global command, applying a rank method) and three costs that
//! depend on the layout's batch size (viewing a card, overviewing the panel,
//! one single edit). Profiles are stored as TOML.

use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// Grid of cards shown concurrently; the batch size is `rows * cols`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Layout {
    pub rows: u32,
    pub cols: u32,
}

impl Layout {
    pub fn new(rows: u32, cols: u32) -> Result<Self, SimError> {
        if rows == 0 || cols == 0 {
            return Err(SimError::InvalidConfig(format!(
                "layout {rows}x{cols} must have positive dimensions"
            )));
        }
        Ok(Self { rows, cols })
    }

    pub fn n_batch(&self) -> usize {
        (self.rows * self.cols) as usize
    }
}

impl std::fmt::Display for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// The six unit costs in effect for one layout, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCosts {
    pub t_new: f64,
    pub t_view: f64,
    pub t_overview: f64,
    pub t_single: f64,
    pub t_global: f64,
    pub t_rank: f64,
}

/// Layout-independent costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenericCosts {
    pub t_new: f64,
    pub t_rank: f64,
    pub t_global: f64,
}

/// Layout-dependent costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutCosts {
    pub rows: u32,
    pub cols: u32,
    pub t_view: f64,
    pub t_overview: f64,
    pub t_single: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingProfile {
    pub id: String,
    pub generic: GenericCosts,
    pub layouts: Vec<LayoutCosts>,
}

impl TimingProfile {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SimError::InvalidConfig(format!(
                    "timing profile '{}': {name} = {v} must be > 0",
                    self.id
                )))
            }
        };
        positive("t_new", self.generic.t_new)?;
        positive("t_rank", self.generic.t_rank)?;
        positive("t_global", self.generic.t_global)?;
        for lc in &self.layouts {
            Layout::new(lc.rows, lc.cols)?;
            positive("t_view", lc.t_view)?;
            positive("t_overview", lc.t_overview)?;
            positive("t_single", lc.t_single)?;
        }
        Ok(())
    }

    pub fn covers(&self, layout: Layout) -> bool {
        self.layouts
            .iter()
            .any(|lc| lc.rows == layout.rows && lc.cols == layout.cols)
    }

    /// All six unit costs for a layout, or an error when uncovered.
    /// Interpolation across unmeasured layouts is deliberately refused.
    pub fn costs(&self, layout: Layout) -> Result<UnitCosts, SimError> {
        let lc = self
            .layouts
            .iter()
            .find(|lc| lc.rows == layout.rows && lc.cols == layout.cols)
            .ok_or(SimError::LayoutNotCovered {
                profile: self.id.clone(),
                rows: layout.rows,
                cols: layout.cols,
            })?;
        Ok(UnitCosts {
            t_new: self.generic.t_new,
            t_view: lc.t_view,
            t_overview: lc.t_overview,
            t_single: lc.t_single,
            t_global: self.generic.t_global,
            t_rank: self.generic.t_rank,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("profile serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let profile: TimingProfile = toml::from_str(text).map_err(|e| SimError::Parse {
            line: 0,
            message: format!("timing profile: {e}"),
        })?;
        profile.validate()?;
        Ok(profile)
    }
}

/// Layouts covered by the synthetic profiles: the union of every layout the
/// bundled sweep presets reference.
pub const SYNTHETIC_LAYOUTS: [(u32, u32); 12] = [
    (1, 1),
    (1, 2),
    (2, 2),
    (2, 3),
    (3, 4),
    (4, 5),
    (5, 6),
    (6, 6),
    (5, 8),
    (6, 8),
    (8, 8),
    (8, 10),
];

fn synthetic_layout_costs(rows: u32, cols: u32, scale: f64) -> LayoutCosts {
    let b = (rows * cols) as f64;
    // Batch-size dependence: card viewing and single edits grow mildly with
    // the batch size (smaller cards, longer pointer travel), while the
    // per-batch overview grows sublinearly so its per-object share shrinks.
    LayoutCosts {
        rows,
        cols,
        t_view: scale * 0.5 * (1.0 + 0.01 * b),
        t_overview: scale * 0.4 * b.sqrt(),
        t_single: scale * 1.0 * (1.0 + 0.015 * b),
    }
}

fn synthetic_profile(id: &str, scale: f64, min_batch: usize) -> TimingProfile {
    TimingProfile {
        id: id.to_string(),
        // Loading a batch and firing a global command both involve a round
        // trip through the UI (progress indicator, confirmation), so they sit
        // well above a single card interaction.
        generic: GenericCosts {
            t_new: 3.0,
            t_rank: 3.0,
            t_global: 3.0,
        },
        layouts: SYNTHETIC_LAYOUTS
            .iter()
            .filter(|(r, c)| (r * c) as usize >= min_batch)
            .map(|&(r, c)| synthetic_layout_costs(r, c, scale))
            .collect(),
    }
}

/// The documented default profile used by the bundled presets and tests.
pub fn synthetic_default() -> TimingProfile {
    synthetic_profile("synthetic-default", 1.0, 1)
}

/// Bundled profiles by id, including the four synthetic application
/// stand-ins. The pixel-level profile covers no small layouts, matching a
/// UI whose cards are useless below a minimum count.
pub fn builtin_profile(id: &str) -> Option<TimingProfile> {
    match id {
        "synthetic-default" => Some(synthetic_default()),
        "synthetic-js-block" => Some(synthetic_profile("synthetic-js-block", 0.7, 1)),
        "synthetic-js-in-bar" => Some(synthetic_profile("synthetic-js-in-bar", 0.8, 1)),
        "synthetic-cbs-image" => Some(synthetic_profile("synthetic-cbs-image", 1.2, 1)),
        "synthetic-cbs-pixel" => Some(synthetic_profile("synthetic-cbs-pixel", 1.6, 20)),
        _ => None,
    }
}

pub const BUILTIN_PROFILE_IDS: [&str; 5] = [
    "synthetic-default",
    "synthetic-js-block",
    "synthetic-js-in-bar",
    "synthetic-cbs-image",
    "synthetic-cbs-pixel",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_default_covers_preset_layouts() {
        let profile = synthetic_default();
        profile.validate().unwrap();
        for &(r, c) in &SYNTHETIC_LAYOUTS {
            assert!(profile.covers(Layout::new(r, c).unwrap()));
        }
    }

    #[test]
    fn missing_layout_is_an_error() {
        let profile = synthetic_default();
        let err = profile.costs(Layout::new(7, 7).unwrap()).unwrap_err();
        assert!(matches!(err, SimError::LayoutNotCovered { .. }));
    }

    #[test]
    fn toml_round_trip() {
        let profile = synthetic_default();
        let text = profile.to_toml();
        let back = TimingProfile::from_toml(&text).unwrap();
        assert_eq!(profile, back);
    }

    #[test]
    fn rejects_nonpositive_values() {
        let mut profile = synthetic_default();
        profile.generic.t_new = 0.0;
        assert!(profile.validate().is_err());
    }

    #[test]
    fn zero_dimension_layout_rejected() {
        assert!(Layout::new(0, 3).is_err());
    }
}
