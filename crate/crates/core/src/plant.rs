//! Simulated environment: velocity-tracked point tool, penalty contacts with
//! the board and the component, lumped solder thermal model with latent heat,
//! and the component slide rule.
//!
//! Sign convention: [`contact_wrench`] returns the reaction the environment
//! applies to the tool. [`plant_step`] returns the *measured* wrench, which is
//! the force the tool applies to the environment (its negation). Pressing on
//! the board therefore reads negative `f_z`, and pushing the component along
//! `-y` reads negative `f_y`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{non_negative, positive, require, ValidationError};
use crate::model::{Pose, ToolWrench, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("melt fraction {0} outside [0, 1]")]
    MeltFractionOutOfRange(f64),
}

/// Physical constants of the simulated cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    /// Board contact stiffness [N/m].
    pub k_n: f64,
    /// Component contact stiffness [N/m].
    pub k_t: f64,
    /// Board contact damping [N s/m].
    pub d_n: f64,
    /// Component contact damping [N s/m].
    pub d_t: f64,
    /// Solder joint heat capacity [J/K].
    #[serde(rename = "C_th")]
    pub heat_capacity: f64,
    /// Hot-air heat transfer coefficient [W/K].
    pub h_air: f64,
    /// Heated-plate heat transfer coefficient [W/K].
    pub h_plate: f64,
    #[serde(rename = "T_air")]
    pub t_air: f64,
    #[serde(rename = "T_plate")]
    pub t_plate: f64,
    #[serde(rename = "T_melt")]
    pub t_melt: f64,
    #[serde(rename = "T0")]
    pub t_initial: f64,
    /// Latent energy needed to fully melt the joints [J].
    #[serde(rename = "E_L")]
    pub latent_energy: f64,
    /// Holding force of fully solid joints [N].
    #[serde(rename = "F_break")]
    pub f_break: f64,
    /// Residual resistance of fully molten joints [N].
    #[serde(rename = "F_res")]
    pub f_res: f64,
    /// Viscous drag of a component sliding on molten solder [N s/m].
    #[serde(rename = "c_slide")]
    pub slide_damping: f64,
    /// Robot velocity tracking time constant [s].
    pub tau_r: f64,
    /// Cartesian velocity limit per axis [m/s].
    pub v_max: f64,
    /// Integration step [s].
    pub dt: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            k_n: 5e4,
            k_t: 2e4,
            d_n: 50.0,
            d_t: 20.0,
            heat_capacity: 20.0,
            h_air: 2.0,
            h_plate: 0.5,
            t_air: 300.0,
            t_plate: 120.0,
            t_melt: 183.0,
            t_initial: 25.0,
            latent_energy: 273.0,
            f_break: 30.0,
            f_res: 0.5,
            slide_damping: 800.0,
            tau_r: 0.05,
            v_max: 0.1,
            dt: 1e-3,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), ValidationError> {
        positive(self.k_n, "k_n")?;
        positive(self.k_t, "k_t")?;
        positive(self.d_n, "d_n")?;
        positive(self.d_t, "d_t")?;
        positive(self.heat_capacity, "C_th")?;
        non_negative(self.h_air, "h_air")?;
        non_negative(self.h_plate, "h_plate")?;
        positive(self.latent_energy, "E_L")?;
        positive(self.f_break, "F_break")?;
        non_negative(self.f_res, "F_res")?;
        require(self.f_break > self.f_res, "F_break", "must exceed F_res")?;
        positive(self.slide_damping, "c_slide")?;
        positive(self.tau_r, "tau_r")?;
        positive(self.v_max, "v_max")?;
        positive(self.dt, "dt")?;
        for (v, f) in [
            (self.t_air, "T_air"),
            (self.t_plate, "T_plate"),
            (self.t_melt, "T_melt"),
            (self.t_initial, "T0"),
        ] {
            require(v.is_finite(), f, "must be finite")?;
        }
        require(self.t_melt > self.t_initial, "T_melt", "must exceed T0")?;
        require(self.t_air > self.t_melt, "T_air", "must exceed T_melt")?;
        require(self.t_plate >= self.t_initial, "T_plate", "must be >= T0")?;
        require(self.dt < self.tau_r, "dt", "must be smaller than tau_r")?;
        require(
            self.dt * (self.h_air + self.h_plate) < self.heat_capacity,
            "dt",
            "thermal step unstable: dt * (h_air + h_plate) must be < C_th",
        )?;
        Ok(())
    }

    fn net_heat_inflow(&self, temperature: f64, air_on: bool) -> f64 {
        let air = if air_on {
            self.h_air * (self.t_air - temperature)
        } else {
            0.0
        };
        air + self.h_plate * (self.t_plate - temperature)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolderState {
    /// °C
    pub temperature: f64,
    /// Fraction of the latent budget absorbed, in [0, 1].
    pub melt_fraction: f64,
    /// Total latent energy to fully melt [J].
    pub latent_budget: f64,
}

impl SolderState {
    pub fn initial(params: &PlantParams) -> Self {
        Self {
            temperature: params.t_initial,
            melt_fraction: 0.0,
            latent_budget: params.latent_energy,
        }
    }
}

/// Slide state of the component relative to its soldered seat.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComponentState {
    /// Distance slid along `-y` from the seat [m].
    pub displacement: f64,
    /// Current slide speed along `-y` [m/s].
    pub speed: f64,
    /// Set once the joints have yielded; never cleared.
    pub moving: bool,
    pub grasped: bool,
}

impl ComponentState {
    /// `y` coordinate of the face the tool pushes on.
    pub fn face_y(&self) -> f64 {
        -self.displacement
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub tool_pose: Pose,
    pub tool_velocity: Vec3,
    pub solder: SolderState,
    pub component: ComponentState,
    pub contact_board: bool,
    pub contact_component: bool,
    pub heating_air_on: bool,
    /// Steps taken; `time = step * dt`.
    pub step: u64,
    pub time: f64,
}

impl PlantState {
    pub fn initial(params: &PlantParams, tool_position: Vec3) -> Self {
        Self {
            tool_pose: Pose::from_translation(tool_position),
            tool_velocity: Vec3::ZERO,
            solder: SolderState::initial(params),
            component: ComponentState::default(),
            contact_board: false,
            contact_component: false,
            heating_air_on: false,
            step: 0,
            time: 0.0,
        }
    }

    pub fn tool_position(&self) -> Vec3 {
        self.tool_pose.position
    }

    pub fn is_finite(&self) -> bool {
        self.tool_pose.is_valid()
            && self.tool_velocity.is_finite()
            && self.solder.temperature.is_finite()
            && self.solder.melt_fraction.is_finite()
            && self.component.displacement.is_finite()
            && self.component.speed.is_finite()
            && self.time.is_finite()
    }
}

/// First-order lag of the robot's internal velocity loop toward the clamped
/// command.
pub fn robot_tracking_step(
    v_actual: Vec3,
    v_cmd: Vec3,
    params: &PlantParams,
) -> Result<Vec3, PlantError> {
    if !v_actual.is_finite() || !v_cmd.is_finite() {
        return Err(PlantError::NonFinite("velocity"));
    }
    let target = v_cmd.map(|v| v.clamp(-params.v_max, params.v_max));
    let next = v_actual + (target - v_actual) * (params.dt / params.tau_r);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(PlantError::NonFinite("tracked velocity"))
    }
}

/// One thermal step. See [`solder_thermal_step_with_heat`].
pub fn solder_thermal_step(s: &SolderState, heating_air_on: bool, params: &PlantParams) -> SolderState {
    solder_thermal_step_with_heat(s, heating_air_on, params).0
}

/// Lumped thermal step returning the new state and the heat absorbed [J].
///
/// Below the melting point the temperature follows
/// `C dT/dt = h_air (T_air - T) [air] + h_plate (T_plate - T)`. At the melting
/// point it is pinned while the net inflow fills the latent budget, and
/// resumes rising once fully molten. A step that crosses a regime boundary is
/// split at the crossing, so the returned heat always equals sensible plus
/// latent change.
pub fn solder_thermal_step_with_heat(
    s: &SolderState,
    heating_air_on: bool,
    params: &PlantParams,
) -> (SolderState, f64) {
    let c = params.heat_capacity;
    let mut next = *s;
    let mut remaining = params.dt;
    let mut heat = 0.0;

    // at most three segments: sensible, latent, sensible
    for _ in 0..3 {
        if remaining <= 0.0 {
            break;
        }
        let pinned = next.temperature >= params.t_melt && next.melt_fraction < 1.0;
        if pinned {
            next.temperature = params.t_melt;
            let power = params.net_heat_inflow(params.t_melt, heating_air_on).max(0.0);
            let needed = (1.0 - next.melt_fraction) * next.latent_budget;
            if power > 0.0 && power * remaining >= needed {
                next.melt_fraction = 1.0;
                heat += needed;
                remaining -= needed / power;
                continue;
            }
            next.melt_fraction += power * remaining / next.latent_budget;
            heat += power * remaining;
            break;
        }

        let power = params.net_heat_inflow(next.temperature, heating_air_on);
        let raised = next.temperature + power * remaining / c;
        if next.melt_fraction < 1.0 && next.temperature < params.t_melt && raised >= params.t_melt {
            let to_melt = params.t_melt - next.temperature;
            heat += c * to_melt;
            remaining -= c * to_melt / power;
            next.temperature = params.t_melt;
            continue;
        }
        next.temperature = raised;
        heat += power * remaining;
        break;
    }
    (next, heat)
}

/// Lateral force the joints resist before the component yields, linear in
/// melt fraction from `F_break` (solid) to `F_res` (molten).
pub fn holding_force(melt_fraction: f64, params: &PlantParams) -> Result<f64, PlantError> {
    if !(0.0..=1.0).contains(&melt_fraction) {
        return Err(PlantError::MeltFractionOutOfRange(melt_fraction));
    }
    Ok(params.f_res + (1.0 - melt_fraction) * (params.f_break - params.f_res))
}

fn board_penetration(state: &PlantState) -> f64 {
    -state.tool_position().z
}

fn component_penetration(state: &PlantState) -> f64 {
    state.component.face_y() - state.tool_position().y
}

/// Penalty-contact reaction of the environment on the tool.
///
/// The board pushes back along `+z` when the tip is below `z = 0`; the
/// component face pushes back along `+y` when the tool face is past it. A
/// stationary component cannot react more than its holding force.
pub fn contact_wrench(state: &PlantState, params: &PlantParams) -> ToolWrench {
    let v = state.tool_velocity;
    let mut force = Vec3::ZERO;

    let dz = board_penetration(state);
    if dz > 0.0 {
        force.z = (params.k_n * dz - params.d_n * v.z).max(0.0);
    }

    let comp = &state.component;
    let dy = component_penetration(state);
    if !comp.grasped && dy > 0.0 {
        let mut f = (params.k_t * dy + params.d_t * (-comp.speed - v.y)).max(0.0);
        if !comp.moving {
            // φ is kept in range by the thermal step
            f = f.min(holding_force(state.solder.melt_fraction.clamp(0.0, 1.0), params).unwrap_or(f));
        }
        force.y = f;
    }
    ToolWrench::from_force(force)
}

/// Breakaway and slide of the component for the tool pose already advanced
/// in `next`. Uses the melt fraction at the start of the step.
fn resolve_component(next: &mut PlantState, melt_fraction: f64, params: &PlantParams) -> Result<(), PlantError> {
    let v_y = next.tool_velocity.y;
    let penetration = component_penetration(next);
    let comp = &mut next.component;
    if comp.grasped {
        comp.speed = 0.0;
        return Ok(());
    }
    let push = params.k_t * penetration - params.d_t * v_y;
    if !comp.moving && penetration > 0.0 && push >= holding_force(melt_fraction, params)? {
        comp.moving = true;
    }
    // massless component: contact force equals F_res + c_slide * u, solved
    // implicitly together with the spring compression it relieves
    let speed = if comp.moving && penetration > 0.0 {
        ((push - params.f_res) / (params.slide_damping + params.d_t + params.k_t * params.dt)).max(0.0)
    } else {
        0.0
    };
    comp.speed = speed;
    comp.displacement += speed * params.dt;
    Ok(())
}

/// Advances the plant by one fixed step with semi-implicit Euler and returns
/// the new state plus the wrench measured at the tool.
pub fn plant_step(
    state: &PlantState,
    v_cmd: Vec3,
    params: &PlantParams,
) -> Result<(PlantState, ToolWrench), PlantError> {
    if !state.is_finite() {
        return Err(PlantError::NonFinite("plant state"));
    }
    let mut next = state.clone();
    next.tool_velocity = robot_tracking_step(state.tool_velocity, v_cmd, params)?;
    next.tool_pose.position = state.tool_position() + next.tool_velocity * params.dt;
    if next.component.grasped {
        next.component.speed = 0.0;
    } else {
        resolve_component(&mut next, state.solder.melt_fraction, params)?;
    }

    let reaction = contact_wrench(&next, params);
    next.contact_board = board_penetration(&next) > 0.0;
    next.contact_component = !next.component.grasped && component_penetration(&next) > 0.0;

    next.solder = solder_thermal_step(&state.solder, state.heating_air_on, params);
    next.step = state.step + 1;
    next.time = next.step as f64 * params.dt;

    if !next.is_finite() {
        return Err(PlantError::NonFinite("plant state"));
    }
    Ok((next, -reaction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params() -> PlantParams {
        PlantParams::default()
    }

    #[test]
    fn defaults_validate() {
        params().validate().unwrap();
    }

    #[test]
    fn tracking_fixed_point_and_clamp() {
        let p = params();
        let v = Vec3::new(0.01, -0.02, 0.03);
        assert_eq!(robot_tracking_step(v, v, &p).unwrap(), v);

        let mut v = Vec3::ZERO;
        for _ in 0..2000 {
            v = robot_tracking_step(v, Vec3::new(5.0, -5.0, 0.0), &p).unwrap();
            assert!(v.x <= p.v_max && v.y >= -p.v_max);
        }
        assert_relative_eq!(v.x, p.v_max, max_relative = 1e-9);
    }

    #[test]
    fn tracking_step_response_at_tau() {
        let p = params();
        // oracle: closed form 1 - e^-1
        let expected = 1.0 - (-1.0f64).exp();
        let steps = (p.tau_r / p.dt).round() as usize;
        let target = Vec3::new(0.05, 0.0, 0.0);
        let mut v = Vec3::ZERO;
        for _ in 0..steps {
            v = robot_tracking_step(v, target, &p).unwrap();
        }
        let frac = v.x / target.x;
        assert!((frac - expected).abs() <= 0.005, "fraction {frac}");
    }

    #[test]
    fn tracking_rejects_non_finite() {
        assert!(robot_tracking_step(Vec3::new(f64::NAN, 0.0, 0.0), Vec3::ZERO, &params()).is_err());
    }

    #[test]
    fn thermal_equilibrium_is_fixed_point() {
        let p = PlantParams {
            h_plate: 0.0,
            ..params()
        };
        let s = SolderState {
            temperature: p.t_air,
            melt_fraction: 1.0,
            latent_budget: p.latent_energy,
        };
        assert_eq!(solder_thermal_step(&s, true, &p), s);
    }

    #[test]
    fn latent_phase_pins_temperature() {
        let p = params();
        let s = SolderState {
            temperature: p.t_melt,
            melt_fraction: 0.2,
            latent_budget: p.latent_energy,
        };
        let n = solder_thermal_step(&s, true, &p);
        assert_eq!(n.temperature, p.t_melt);
        assert_relative_eq!(n.melt_fraction - 0.2, 202.5 * p.dt / p.latent_energy, max_relative = 1e-12);
    }

    #[test]
    fn holding_force_endpoints_and_midpoint() {
        let p = params();
        assert_eq!(holding_force(0.0, &p).unwrap(), 30.0);
        assert_eq!(holding_force(1.0, &p).unwrap(), 0.5);
        assert_relative_eq!(holding_force(0.5, &p).unwrap(), 15.25, epsilon = 1e-12);
        assert!(matches!(
            holding_force(1.5, &p),
            Err(PlantError::MeltFractionOutOfRange(_))
        ));
        assert!(holding_force(-0.1, &p).is_err());
    }

    fn state_at(position: Vec3) -> PlantState {
        PlantState::initial(&params(), position)
    }

    #[test]
    fn no_penetration_no_wrench() {
        let s = state_at(Vec3::new(0.0, 0.001, 0.002));
        assert_eq!(contact_wrench(&s, &params()), ToolWrench::ZERO);
    }

    #[test]
    fn board_hooke() {
        let s = state_at(Vec3::new(0.0, 0.001, -1e-4));
        let w = contact_wrench(&s, &params());
        assert_relative_eq!(w.force.z, 5.0, max_relative = 1e-12);
        assert_eq!(w.force.y, 0.0);
    }

    #[test]
    fn component_hooke() {
        let s = state_at(Vec3::new(0.0, -5e-4, 0.001));
        let w = contact_wrench(&s, &params());
        assert_relative_eq!(w.force.y, 10.0, max_relative = 1e-12);
        assert_eq!(w.force.z, 0.0);
    }

    #[test]
    fn quiescent_step_only_advances_time() {
        let p = PlantParams {
            h_plate: 0.0,
            ..params()
        };
        let s = PlantState::initial(&p, Vec3::new(0.0, 0.001, 0.002));
        let (n, w) = plant_step(&s, Vec3::ZERO, &p).unwrap();
        assert_eq!(n.tool_position(), s.tool_position());
        assert_eq!(n.solder, s.solder);
        assert_eq!(n.time, p.dt);
        assert_eq!(w, ToolWrench::ZERO);
    }

    #[test]
    fn push_below_holding_force_keeps_component_seated() {
        let p = params();
        // 1 mm compression = 20 N against F_break = 30 N
        let mut s = state_at(Vec3::new(0.0, -1e-3, 0.001));
        for _ in 0..500 {
            let (n, w) = plant_step(&s, Vec3::ZERO, &p).unwrap();
            assert_relative_eq!(w.force.y, -20.0, max_relative = 1e-9);
            s = n;
        }
        assert_eq!(s.component.displacement, 0.0);
        assert!(!s.component.moving);
    }

    #[test]
    fn molten_joint_yields_under_push() {
        let p = params();
        let mut s = state_at(Vec3::new(0.0, -1e-3, 0.001));
        s.solder.melt_fraction = 0.9;
        s.solder.temperature = p.t_melt;
        let (n, w) = plant_step(&s, Vec3::ZERO, &p).unwrap();
        assert!(n.component.moving);
        assert!(n.component.displacement > 0.0);
        assert!(w.force.y > -20.0);
    }

    #[test]
    fn non_finite_state_rejected() {
        let mut s = state_at(Vec3::ZERO);
        s.tool_velocity.x = f64::INFINITY;
        assert!(plant_step(&s, Vec3::ZERO, &params()).is_err());
    }

    fn random_params() -> impl Strategy<Value = PlantParams> {
        (0.5..40.0f64, 0.0..4.0f64, 0.0..2.0f64, 200.0..400.0f64, 25.0..180.0f64, 20.0..600.0f64)
            .prop_map(|(c, ha, hp, ta, tp, el)| PlantParams {
                heat_capacity: c,
                h_air: ha,
                h_plate: hp,
                t_air: ta,
                t_plate: tp,
                latent_energy: el,
                dt: 1e-3,
                ..PlantParams::default()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn thermal_monotone_bounded_and_conserves_energy(p in random_params(), air_pattern in any::<u64>()) {
            let mut s = SolderState::initial(&p);
            let upper = p.t_air.max(p.t_plate);
            for k in 0..4000u32 {
                let air = (air_pattern >> (k / 200 % 64)) & 1 == 1;
                let (n, heat) = solder_thermal_step_with_heat(&s, air, &p);
                prop_assert!(n.melt_fraction >= s.melt_fraction);
                prop_assert!((0.0..=1.0).contains(&n.melt_fraction));
                prop_assert!(n.temperature <= upper + 1e-9);
                prop_assert!(n.temperature >= p.t_initial - 1e-9);
                let stored = p.heat_capacity * (n.temperature - s.temperature)
                    + s.latent_budget * (n.melt_fraction - s.melt_fraction);
                // floor covers rounding of C*(T' - T) near equilibrium
                prop_assert!((stored - heat).abs() <= 1e-6 * heat.abs().max(1e-5),
                    "stored {} heat {}", stored, heat);
                s = n;
            }
        }

        #[test]
        fn holding_force_monotone(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
            let p = PlantParams::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(holding_force(hi, &p).unwrap() <= holding_force(lo, &p).unwrap());
        }

        #[test]
        fn contacts_vanish_without_penetration(x in -0.1..0.1f64, y in 0.0..0.1f64, z in 0.0..0.1f64,
                                               vx in -0.1..0.1f64, vy in -0.1..0.1f64, vz in -0.1..0.1f64) {
            let p = PlantParams::default();
            let mut s = PlantState::initial(&p, Vec3::new(x, y, z));
            s.tool_velocity = Vec3::new(vx, vy, vz);
            prop_assert_eq!(contact_wrench(&s, &p), ToolWrench::ZERO);
        }
    }
}
