//! Deterministic simulation and control of hot-air assisted component
//! removal: a tool pushes a soldered component sideways while the joint is
//! heated, detects melting and slide-off, then grasps and carries it away.
//!
//! Layers, bottom up: geometric types ([`model`]), the plant ([`plant`]),
//! hybrid force/velocity control ([`controller`]), event detection
//! ([`detector`]), the phase machine ([`phase`]) and the run harness
//! ([`sim`]) driven by JSON [`scenario`] documents.

pub mod controller;
pub mod detector;
pub mod error;
pub mod model;
pub mod phase;
pub mod plant;
pub mod scenario;
pub mod sim;
pub mod trace;

pub use controller::{AxisMode, Controller, ControllerConfig, ControllerState};
pub use detector::{DetectorConfig, Event, JamParams, TimedEvent};
pub use error::ValidationError;
pub use model::{Axis, Pose, SignalWindow, ToolWrench, Vec3};
pub use phase::{FaultReason, Phase, PhaseLabel, Stage};
pub use plant::{PlantParams, PlantState};
pub use scenario::{parse_scenario, ConfigError, Scenario};
pub use sim::{run_batch, run_scenario, BatchReport, RunReport, Simulation};
pub use trace::{read_trace, write_trace, TraceSample};
