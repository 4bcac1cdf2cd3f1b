//! Per-axis hybrid force/compliance controller emitting Cartesian velocity
//! commands.
//!
//! The extraction axis runs a PI loop on force error; the remaining axes yield
//! to external forces with a pure damping law (no spring-back to a reference
//! path). Outside contact, axes follow velocity profiles or hold position.

use serde::{Deserialize, Serialize};

use crate::error::{positive, ValidationError};
use crate::model::{Axis, ToolWrench, Vec3};

/// Control law applied to one Cartesian axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AxisMode {
    /// Regulate the measured force to `setpoint` [N].
    ForceRegulate { setpoint: f64 },
    /// Yield to external force with `gain` [m/(s N)].
    Compliant { gain: f64 },
    /// Constant velocity [m/s].
    VelocityProfile { velocity: f64 },
    /// Proportional hold of the position captured when the mode was entered.
    Hold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Force setpoint on the extraction axis [N].
    pub f_d: f64,
    /// Proportional force gain [m/(s N)].
    #[serde(rename = "Kp")]
    pub kp: f64,
    /// Integral force gain [m/(s^2 N)].
    #[serde(rename = "Ki")]
    pub ki: f64,
    /// Integrator clamp [m/s].
    #[serde(rename = "I_max")]
    pub i_max: f64,
    /// Compliance gain [m/(s N)].
    #[serde(rename = "C")]
    pub compliance: f64,
    /// Approach speed [m/s].
    pub v_app: f64,
    /// Hold-axis position gain [1/s].
    pub hold_gain: f64,
    /// Cruise speed toward the transport target [m/s].
    pub transport_speed: f64,
    /// Duration of the setpoint ramp on entering contact [s].
    pub force_ramp_s: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            f_d: -20.0,
            kp: 2e-3,
            ki: 2e-2,
            i_max: 0.05,
            compliance: 1e-3,
            v_app: 0.02,
            hold_gain: 5.0,
            transport_speed: 0.05,
            force_ramp_s: 0.5,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if !self.f_d.is_finite() || self.f_d == 0.0 {
            return Err(ValidationError::new("f_d", "must be finite and non-zero"));
        }
        positive(self.kp, "Kp")?;
        positive(self.ki, "Ki")?;
        positive(self.i_max, "I_max")?;
        positive(self.compliance, "C")?;
        positive(self.v_app, "v_app")?;
        positive(self.hold_gain, "hold_gain")?;
        positive(self.transport_speed, "transport_speed")?;
        positive(self.force_ramp_s, "force_ramp_s")?;
        Ok(())
    }
}

/// Per-axis modes, integrators and hold references.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub modes: [AxisMode; 3],
    pub integrator: [f64; 3],
    pub hold_reference: Vec3,
}

impl ControllerState {
    /// All axes holding `position`.
    pub fn holding(position: Vec3) -> Self {
        Self {
            modes: [AxisMode::Hold; 3],
            integrator: [0.0; 3],
            hold_reference: position,
        }
    }

    pub fn mode(&self, axis: Axis) -> AxisMode {
        self.modes[axis.index()]
    }

    /// Switches to `modes`. An axis entering `Hold` captures `position` as its
    /// reference; an axis leaving `ForceRegulate` drops its integrator.
    pub fn set_modes(&mut self, modes: [AxisMode; 3], position: Vec3) {
        for axis in Axis::ALL {
            let i = axis.index();
            let (old, new) = (self.modes[i], modes[i]);
            if matches!(new, AxisMode::Hold) && !matches!(old, AxisMode::Hold) {
                self.hold_reference.set(axis, position.get(axis));
            }
            if !matches!(new, AxisMode::ForceRegulate { .. }) {
                self.integrator[i] = 0.0;
            }
            self.modes[i] = new;
        }
    }
}

/// Controller configuration bound to the plant's step and velocity limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub config: ControllerConfig,
    pub dt: f64,
    pub v_max: f64,
}

impl Controller {
    pub fn new(config: ControllerConfig, dt: f64, v_max: f64) -> Self {
        Self { config, dt, v_max }
    }

    /// PI step on force error `setpoint - f_meas`. Returns the unclamped
    /// velocity and the updated (clamped) integrator.
    pub fn force_control_step(&self, integrator: f64, setpoint: f64, f_meas: f64) -> (f64, f64) {
        let cfg = &self.config;
        let error = setpoint - f_meas;
        let integrator = (integrator + cfg.ki * error * self.dt).clamp(-cfg.i_max, cfg.i_max);
        (cfg.kp * error + integrator, integrator)
    }

    /// Damping-style yield: velocity along the external force.
    pub fn compliance_step(&self, f_external: f64, gain: f64) -> f64 {
        (gain * f_external).clamp(-self.v_max, self.v_max)
    }

    /// Routes each axis through its mode.
    ///
    /// `measured` uses the plant's convention (force applied by the tool), so
    /// compliant axes yield to its negation, the force the environment
    /// applies to the tool.
    pub fn step(&self, state: &ControllerState, measured: &ToolWrench, position: Vec3) -> (Vec3, ControllerState) {
        let mut next = state.clone();
        let mut command = Vec3::ZERO;
        for axis in Axis::ALL {
            let i = axis.index();
            let f = measured.force.get(axis);
            let v = match state.modes[i] {
                AxisMode::ForceRegulate { setpoint } => {
                    let (v, integ) = self.force_control_step(state.integrator[i], setpoint, f);
                    next.integrator[i] = integ;
                    v
                }
                AxisMode::Compliant { gain } => self.compliance_step(-f, gain),
                AxisMode::VelocityProfile { velocity } => velocity,
                AxisMode::Hold => {
                    self.config.hold_gain * (state.hold_reference.get(axis) - position.get(axis))
                }
            };
            let v = if v.is_finite() { v } else { 0.0 };
            command.set(axis, v.clamp(-self.v_max, self.v_max));
        }
        (command, next)
    }
}
