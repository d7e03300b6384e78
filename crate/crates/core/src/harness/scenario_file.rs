//! Versioned JSON scenario documents.
//!
//! Vessels name either a preset (`"type": "type1"`) or carry an explicit
//! parameter block. Writing picks the preset form whenever the parameters
//! equal a preset exactly, so both forms round-trip losslessly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{VesselParams, VesselState};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::simulator::{IsmVessel, ObstacleVessel, Scenario, TimedState};

pub const SCHEMA_VERSION: u32 = 1;

const PRESETS: [&str; 2] = ["type1", "type2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    /// Alternative to `max_steps`, in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub collision_margin: f64,
    pub vessels: Vec<VesselEntry>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselEntry {
    pub name: String,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub vessel_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<VesselParams>,
    pub initial: VesselState,
    pub goals: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEntry {
    pub name: String,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub vessel_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<VesselParams>,
    pub trajectory: Vec<TimedEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedEntry {
    pub t: f64,
    #[serde(flatten)]
    pub state: VesselState,
}

fn params_entry(p: &VesselParams) -> (Option<String>, Option<VesselParams>) {
    for name in PRESETS {
        if VesselParams::preset(name).is_ok_and(|preset| preset == *p) {
            return (Some(name.to_string()), None);
        }
    }
    (None, Some(p.clone()))
}

fn resolve_params(name: &str, ty: &Option<String>, params: &Option<VesselParams>) -> Result<VesselParams> {
    match (ty, params) {
        (_, Some(p)) if ty.is_none() => Ok(p.clone()),
        (Some(t), None) => VesselParams::preset(t).map_err(|e| Error::Validation(format!("vessel {name:?}: {e}"))),
        (Some(_), Some(_)) => Err(Error::Validation(format!(
            "vessel {name:?} gives both a type and explicit params"
        ))),
        (None, None) => Err(Error::Validation(format!("vessel {name:?} needs a type or params"))),
        _ => unreachable!(),
    }
}

impl ScenarioFile {
    pub fn from_scenario(s: &Scenario) -> Self {
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            dt: s.dt,
            max_steps: Some(s.max_steps),
            t_max: None,
            seed: s.seed,
            collision_margin: s.collision_margin,
            vessels: s
                .vessels
                .iter()
                .map(|v| {
                    let (vessel_type, params) = params_entry(&v.params);
                    VesselEntry {
                        name: v.name.clone(),
                        vessel_type,
                        params,
                        initial: v.initial,
                        goals: v.goals.clone(),
                    }
                })
                .collect(),
            obstacles: s
                .obstacles
                .iter()
                .map(|o| {
                    let (vessel_type, params) = params_entry(&o.params);
                    ObstacleEntry {
                        name: o.name.clone(),
                        vessel_type,
                        params,
                        trajectory: o
                            .trajectory
                            .iter()
                            .map(|s| TimedEntry { t: s.t, state: s.state })
                            .collect(),
                    }
                })
                .collect(),
        }
    }

    pub fn into_scenario(self) -> Result<Scenario> {
        let scenario = self.build()?;
        scenario.validate()?;
        Ok(scenario)
    }

    fn build(self) -> Result<Scenario> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let max_steps = match (self.max_steps, self.t_max) {
            (Some(n), None) => n,
            (None, Some(t)) if t > 0.0 && self.dt > 0.0 => (t / self.dt).ceil() as usize,
            (None, Some(t)) => return Err(Error::Validation(format!("t_max must be positive, got {t}"))),
            (Some(_), Some(_)) => return Err(Error::Validation("give either max_steps or t_max, not both".into())),
            (None, None) => return Err(Error::Validation("max_steps or t_max is required".into())),
        };
        let vessels = self
            .vessels
            .into_iter()
            .map(|v| {
                Ok(IsmVessel {
                    params: resolve_params(&v.name, &v.vessel_type, &v.params)?,
                    name: v.name,
                    initial: v.initial,
                    goals: v.goals,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let obstacles = self
            .obstacles
            .into_iter()
            .map(|o| {
                Ok(ObstacleVessel {
                    params: resolve_params(&o.name, &o.vessel_type, &o.params)?,
                    name: o.name,
                    trajectory: o
                        .trajectory
                        .into_iter()
                        .map(|e| TimedState { t: e.t, state: e.state })
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Scenario {
            dt: self.dt,
            max_steps,
            seed: self.seed,
            vessels,
            obstacles,
            collision_margin: self.collision_margin,
        })
    }
}

pub fn to_string(s: &Scenario) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from_scenario(s)).expect("scenario serializes")
}

pub fn from_str(text: &str) -> Result<Scenario> {
    serde_json::from_str::<ScenarioFile>(text)?.into_scenario()
}

pub fn save(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_string(s)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}
