//! Scenario documents: JSON with strict keys, documented defaults, and
//! validation that names the offending field.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::ControllerConfig;
use crate::detector::{DetectorConfig, JamParams};
use crate::error::{non_negative, positive, require, ValidationError};
use crate::model::{Pose, Vec3};
use crate::plant::PlantParams;

/// Environment variable overriding the integration step, in integer
/// microseconds.
pub const DT_OVERRIDE_ENV: &str = "DESOLDER_SIM_DT_US";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("{DT_OVERRIDE_ENV}={value:?} is not a positive integer")]
    BadDtOverride { value: String },
    #[error("unknown library scenario `{0}`")]
    UnknownScenario(String),
}

impl From<serde_json::Error> for ConfigError {
    fn from(e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        let (line, column) = (e.line(), e.column());
        let message = e.to_string();
        match e.classify() {
            Category::Data => ConfigError::Schema {
                line,
                column,
                message,
            },
            _ => ConfigError::Syntax {
                line,
                column,
                message,
            },
        }
    }
}

/// Component footprint and surroundings, in millimetres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComponentGeometry {
    pub width_mm: f64,
    pub length_mm: f64,
    pub height_mm: f64,
    /// Free space to the nearest neighbouring component.
    pub clearance_mm: f64,
}

impl Default for ComponentGeometry {
    fn default() -> Self {
        Self {
            width_mm: 10.0,
            length_mm: 10.0,
            height_mm: 1.5,
            clearance_mm: 6.0,
        }
    }
}

impl ComponentGeometry {
    fn validate(&self) -> Result<(), ValidationError> {
        positive(self.width_mm, "width_mm")?;
        positive(self.length_mm, "length_mm")?;
        positive(self.height_mm, "height_mm")?;
        non_negative(self.clearance_mm, "clearance_mm")
    }
}

/// Where the tool starts relative to the component face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolStart {
    /// Tip height above the board.
    pub height_mm: f64,
    /// Gap between the tool face and the component face along `y`.
    pub gap_mm: f64,
}

impl Default for ToolStart {
    fn default() -> Self {
        Self {
            height_mm: 2.0,
            gap_mm: 0.2,
        }
    }
}

impl ToolStart {
    pub fn position(&self) -> Vec3 {
        Vec3::new(0.0, self.gap_mm * 1e-3, self.height_mm * 1e-3)
    }

    fn validate(&self) -> Result<(), ValidationError> {
        positive(self.height_mm, "height_mm")?;
        non_negative(self.gap_mm, "gap_mm")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseSpec {
    /// [m]
    pub position: [f64; 3],
    /// `[w, x, y, z]`, normalized on load.
    pub rotation: [f64; 4],
}

impl Default for PoseSpec {
    fn default() -> Self {
        Self {
            position: [0.05, 0.0, 0.05],
            rotation: [1.0, 0.0, 0.0, 0.0],
        }
    }
}

impl PoseSpec {
    pub fn to_pose(&self) -> Result<Pose, ValidationError> {
        Pose::new(Vec3::from_array(self.position), self.rotation)
            .map_err(|e| ValidationError::new("rotation", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub label: String,
    pub seed: u64,
    pub component: ComponentGeometry,
    pub tool_start: ToolStart,
    pub plant: PlantParams,
    pub controller: ControllerConfig,
    pub detector: DetectorConfig,
    pub jam: JamParams,
    pub transport_target: PoseSpec,
    pub duration_cap_s: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            label: "default".to_string(),
            seed: 0,
            component: ComponentGeometry::default(),
            tool_start: ToolStart::default(),
            plant: PlantParams::default(),
            controller: ControllerConfig::default(),
            detector: DetectorConfig::default(),
            jam: JamParams::default(),
            transport_target: PoseSpec::default(),
            duration_cap_s: 60.0,
        }
    }
}

/// Names of the scenarios shipped with the crate.
pub const LIBRARY: [&str; 4] = ["nominal_chip", "mobilephone_chip", "no_heat", "small_component"];

impl Scenario {
    pub fn validate(&self) -> Result<(), ValidationError> {
        self.component.validate().map_err(|e| e.in_section("component"))?;
        self.tool_start.validate().map_err(|e| e.in_section("tool_start"))?;
        self.plant.validate().map_err(|e| e.in_section("plant"))?;
        self.controller.validate().map_err(|e| e.in_section("controller"))?;
        self.detector.validate().map_err(|e| e.in_section("detector"))?;
        self.jam.validate().map_err(|e| e.in_section("jam"))?;
        self.transport_target
            .to_pose()
            .map_err(|e| e.in_section("transport_target"))?;
        for (i, c) in self.transport_target.position.iter().enumerate() {
            require(
                c.is_finite(),
                &format!("transport_target.position[{i}]"),
                "must be finite",
            )?;
        }
        require(
            self.duration_cap_s.is_finite() && self.duration_cap_s > 0.0,
            "duration_cap_s",
            "must be finite and > 0",
        )?;
        Ok(())
    }

    pub fn clearance_m(&self) -> f64 {
        self.component.clearance_mm * 1e-3
    }

    pub fn transport_pose(&self) -> Pose {
        self.transport_target
            .to_pose()
            .unwrap_or_else(|_| Pose::identity())
    }

    /// Applies `DESOLDER_SIM_DT_US` if set, then re-validates.
    pub fn apply_env_overrides(&mut self) -> Result<(), ConfigError> {
        match std::env::var(DT_OVERRIDE_ENV) {
            Ok(value) => self.apply_dt_override(&value),
            Err(_) => Ok(()),
        }
    }

    pub fn apply_dt_override(&mut self, value: &str) -> Result<(), ConfigError> {
        let us: u64 = value
            .trim()
            .parse()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| ConfigError::BadDtOverride {
                value: value.to_string(),
            })?;
        self.plant.dt = us as f64 * 1e-6;
        self.validate()?;
        Ok(())
    }

    /// A scenario from the shipped library.
    pub fn library(name: &str) -> Result<Scenario, ConfigError> {
        let text = match name {
            "nominal_chip" => include_str!("../scenarios/nominal_chip.json"),
            "mobilephone_chip" => include_str!("../scenarios/mobilephone_chip.json"),
            "no_heat" => include_str!("../scenarios/no_heat.json"),
            "small_component" => include_str!("../scenarios/small_component.json"),
            other => return Err(ConfigError::UnknownScenario(other.to_string())),
        };
        parse_scenario(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Parses and validates a JSON scenario document. Unknown keys are rejected
/// and missing keys take their documented defaults.
pub fn parse_scenario(document: &str) -> Result<Scenario, ConfigError> {
    let scenario: Scenario = serde_json::from_str(document)?;
    scenario.validate()?;
    Ok(scenario)
}
