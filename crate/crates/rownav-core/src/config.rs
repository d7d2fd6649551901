//! Trial configuration: one TOML file resolves to a complete [`TrialSetup`].

use crate::control::ControllerGains;
use crate::geometry::WorldPoint;
use crate::navigator::{MissionPlan, NavigatorConfig};
use crate::simulator::{
    default_duration, NoiseSpec, RowSegment, Script, ScriptEvent, TrialSetup, VineyardLayout,
};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown layout preset {0:?}")]
    UnknownPreset(String),
    #[error("layout: {0}")]
    Layout(String),
    #[error("mission plan: {0}")]
    Plan(String),
    #[error("{0}")]
    Invalid(String),
}

/// Layout selection: a named preset or explicit rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub preset: Option<String>,
    pub name: Option<String>,
    /// Explicit rows as `[e0, n0, u0, e1, n1, u1]`.
    pub rows: Option<Vec<[f64; 6]>>,
    pub row_spacing: Option<f64>,
    pub slope_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionConfig {
    /// Corridors to traverse in order; all of them (serpentine) when unset.
    pub corridors: Option<Vec<usize>>,
}

/// One trial definition; every section has working defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub layout: LayoutConfig,
    pub mission: MissionConfig,
    pub noise: NoiseSpec,
    pub gains: ControllerGains,
    pub navigator: NavigatorConfig,
    pub script: Vec<ScriptEvent>,
    pub max_duration: Option<f64>,
}

impl TrialConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }

    pub fn layout(&self) -> Result<VineyardLayout, ConfigError> {
        let mut layout = match (&self.layout.preset, &self.layout.rows) {
            (Some(name), None) => VineyardLayout::preset(name)
                .ok_or_else(|| ConfigError::UnknownPreset(name.clone()))?,
            (None, Some(rows)) => {
                let segs: Vec<RowSegment> = rows
                    .iter()
                    .map(|r| {
                        RowSegment::new(
                            WorldPoint::new(r[0], r[1], r[2]),
                            WorldPoint::new(r[3], r[4], r[5]),
                        )
                    })
                    .collect();
                let spacing = self.layout.row_spacing.ok_or_else(|| {
                    ConfigError::Invalid("explicit rows require row_spacing".into())
                })?;
                VineyardLayout {
                    name: self.layout.name.clone().unwrap_or_else(|| "custom".into()),
                    rows: segs,
                    row_spacing: spacing,
                    slope: self.layout.slope_deg.unwrap_or(0.0).to_radians(),
                }
            }
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid("choose either preset or explicit rows".into()))
            }
            (None, None) => VineyardLayout::crt(),
        };
        if let Some(spacing) = self.layout.row_spacing {
            layout.row_spacing = spacing;
        }
        if let Some(name) = &self.layout.name {
            layout.name = name.clone();
        }
        layout.validate().map_err(|e| ConfigError::Layout(e.to_string()))?;
        Ok(layout)
    }

    pub fn plan(&self, layout: &VineyardLayout) -> Result<MissionPlan, ConfigError> {
        MissionPlan::serpentine(layout, self.mission.corridors.clone())
            .map_err(|e| ConfigError::Plan(e.to_string()))
    }

    /// Resolve to a runnable setup.
    pub fn setup(&self, seed: u64, strict: bool) -> Result<TrialSetup, ConfigError> {
        let layout = self.layout()?;
        let plan = self.plan(&layout)?;
        self.noise.validate().map_err(ConfigError::Invalid)?;
        self.gains.validate().map_err(ConfigError::Invalid)?;
        let max_duration =
            self.max_duration.unwrap_or_else(|| default_duration(&layout, &plan));
        Ok(TrialSetup {
            layout,
            plan,
            noise: self.noise.clone(),
            gains: self.gains,
            nav: self.navigator.clone(),
            script: Script { events: self.script.clone() },
            seed,
            max_duration,
            strict,
            start_pose: None,
        })
    }
}
