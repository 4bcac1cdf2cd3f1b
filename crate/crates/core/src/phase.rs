//! Six-phase extraction process: approach, contact, melting, grasping,
//! transport, release. Maps each phase to per-axis control modes and the
//! heater/gripper commands.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{AxisMode, ControllerConfig};
use crate::detector::Event;
use crate::model::{Pose, Vec3};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhaseError {
    #[error("phase {0} is terminal")]
    Terminal(Phase),
    #[error("unknown phase label `{0}`")]
    UnknownLabel(String),
}

/// The non-terminal phases, in process order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Approach,
    Contact,
    Melting,
    Grasping,
    Transport,
    Release,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Approach,
        Stage::Contact,
        Stage::Melting,
        Stage::Grasping,
        Stage::Transport,
        Stage::Release,
    ];

    /// Lower-case config key.
    pub fn key(self) -> &'static str {
        match self {
            Stage::Approach => "approach",
            Stage::Contact => "contact",
            Stage::Melting => "melting",
            Stage::Grasping => "grasping",
            Stage::Transport => "transport",
            Stage::Release => "release",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultReason {
    Timeout(Stage),
    GraspFailed,
}

impl fmt::Display for FaultReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultReason::Timeout(stage) => write!(f, "Timeout({stage})"),
            FaultReason::GraspFailed => f.write_str("GraspFailed"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Active(Stage),
    Done,
    Fault(FaultReason),
}

impl Phase {
    pub const APPROACH: Phase = Phase::Active(Stage::Approach);

    pub fn is_terminal(self) -> bool {
        !matches!(self, Phase::Active(_))
    }

    pub fn stage(self) -> Option<Stage> {
        match self {
            Phase::Active(s) => Some(s),
            _ => None,
        }
    }

    pub fn label(self) -> PhaseLabel {
        match self {
            Phase::Active(s) => PhaseLabel::Active(s),
            Phase::Done => PhaseLabel::Done,
            Phase::Fault(_) => PhaseLabel::Fault,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Active(s) => write!(f, "{s}"),
            Phase::Done => f.write_str("Done"),
            Phase::Fault(r) => write!(f, "Fault({r})"),
        }
    }
}

/// Phase name as written in traces: the fault reason is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseLabel {
    Active(Stage),
    Done,
    Fault,
}

impl PhaseLabel {
    /// Position in process order; terminal labels sort last.
    pub fn ordinal(self) -> usize {
        match self {
            PhaseLabel::Active(s) => s as usize,
            PhaseLabel::Done | PhaseLabel::Fault => Stage::ALL.len(),
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseLabel::Active(s) => write!(f, "{s}"),
            PhaseLabel::Done => f.write_str("Done"),
            PhaseLabel::Fault => f.write_str("Fault"),
        }
    }
}

impl FromStr for PhaseLabel {
    type Err = PhaseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Done" => Ok(PhaseLabel::Done),
            "Fault" => Ok(PhaseLabel::Fault),
            other => Stage::ALL
                .into_iter()
                .find(|st| st.to_string() == other)
                .map(PhaseLabel::Active)
                .ok_or_else(|| PhaseError::UnknownLabel(s.to_string())),
        }
    }
}

/// Transition table of the process. Pairs without an edge leave the phase
/// unchanged; annotations never transition.
pub fn transition(phase: Phase, event: Event) -> Result<Phase, PhaseError> {
    let Phase::Active(stage) = phase else {
        return Err(PhaseError::Terminal(phase));
    };
    use Stage::*;
    let next = match (stage, event) {
        (_, Event::Timeout(s)) => Phase::Fault(FaultReason::Timeout(s)),
        (Approach, Event::ContactDetected) => Phase::Active(Contact),
        (Contact, Event::ForceSettled) => Phase::Active(Melting),
        (Melting, Event::RemovalComplete) => Phase::Active(Grasping),
        (Grasping, Event::GraspSecured) => Phase::Active(Transport),
        (Grasping, Event::GraspFailed) => Phase::Fault(FaultReason::GraspFailed),
        (Transport, Event::Arrived) => Phase::Active(Release),
        (Release, Event::Released) => Phase::Done,
        _ => phase,
    };
    Ok(next)
}

/// Actuator and control-mode assignment for one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    /// x, y, z
    pub modes: [AxisMode; 3],
    pub heating_air_on: bool,
    pub grasp_actuate: bool,
    pub release_actuate: bool,
    pub transport_target: Option<Pose>,
}

/// Inputs the profiles depend on besides the phase itself.
#[derive(Debug, Clone)]
pub struct ProfileContext<'a> {
    pub controller: &'a ControllerConfig,
    pub transport_target: Pose,
    /// Time since the phase was entered [s].
    pub time_in_phase: f64,
    pub tool_position: Vec3,
}

fn transport_velocity(ctx: &ProfileContext<'_>) -> Vec3 {
    let cfg = ctx.controller;
    let delta = ctx.transport_target.position - ctx.tool_position;
    let dist = delta.norm();
    if dist == 0.0 {
        return Vec3::ZERO;
    }
    // cruise, then exponential approach inside hold_gain's reach
    let speed = cfg.transport_speed.min(cfg.hold_gain * dist);
    delta * (speed / dist)
}

pub fn phase_profile(phase: Phase, ctx: &ProfileContext<'_>) -> Result<PhaseProfile, PhaseError> {
    let Phase::Active(stage) = phase else {
        return Err(PhaseError::Terminal(phase));
    };
    let cfg = ctx.controller;
    let compliant = AxisMode::Compliant {
        gain: cfg.compliance,
    };
    let hold_all = PhaseProfile {
        modes: [AxisMode::Hold; 3],
        heating_air_on: false,
        grasp_actuate: false,
        release_actuate: false,
        transport_target: None,
    };
    let profile = match stage {
        Stage::Approach => PhaseProfile {
            modes: [
                AxisMode::Hold,
                AxisMode::Hold,
                AxisMode::VelocityProfile { velocity: -cfg.v_app },
            ],
            ..hold_all
        },
        Stage::Contact => {
            let ramp = (ctx.time_in_phase / cfg.force_ramp_s).clamp(0.0, 1.0);
            PhaseProfile {
                modes: [
                    compliant,
                    AxisMode::ForceRegulate {
                        setpoint: cfg.f_d * ramp,
                    },
                    compliant,
                ],
                heating_air_on: true,
                ..hold_all
            }
        }
        Stage::Melting => PhaseProfile {
            modes: [
                compliant,
                AxisMode::ForceRegulate { setpoint: cfg.f_d },
                compliant,
            ],
            heating_air_on: true,
            ..hold_all
        },
        Stage::Grasping => PhaseProfile {
            grasp_actuate: true,
            ..hold_all
        },
        Stage::Transport => {
            let v = transport_velocity(ctx);
            PhaseProfile {
                modes: Vec3::to_array(v).map(|velocity| AxisMode::VelocityProfile { velocity }),
                transport_target: Some(ctx.transport_target),
                ..hold_all
            }
        }
        Stage::Release => PhaseProfile {
            release_actuate: true,
            ..hold_all
        },
    };
    Ok(profile)
}
