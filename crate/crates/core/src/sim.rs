//! Fixed-step loop wiring detectors, phase machine, controller and plant,
//! plus Monte-Carlo batches over derived seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{AxisMode, Controller, ControllerState};
use crate::detector::{
    contact_baseline, detect_contact, detect_grasp_outcome, detect_melt_onset, detect_removal_complete,
    detect_settled, Event, TimedEvent,
};
use crate::error::ValidationError;
use crate::model::{ModelError, SignalWindow, ToolWrench};
use crate::phase::{phase_profile, transition, FaultReason, Phase, PhaseError, PhaseProfile, ProfileContext, Stage};
use crate::plant::{plant_step, PlantError, PlantState};
use crate::scenario::Scenario;
use crate::trace::TraceSample;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("plant: {0}")]
    Plant(#[from] PlantError),
    #[error("phase machine: {0}")]
    Phase(#[from] PhaseError),
    #[error("signal: {0}")]
    Model(#[from] ModelError),
    #[error("batch needs at least one trial")]
    NoTrials,
}

/// Outcome of one scenario run.
///
/// `time_to_contact` is absolute simulation time. `time_to_settle`,
/// `time_to_melt_onset` and `time_to_removal` are measured from heating onset,
/// which is when contact is detected and the hot air switches on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub seed: u64,
    pub desolder_success: bool,
    pub grasp_success: bool,
    /// The component slid before any solder had melted.
    pub early_motion: bool,
    /// The run reached `Done`.
    pub completed: bool,
    pub final_phase: String,
    pub fault: Option<FaultReason>,
    pub heating_onset: Option<f64>,
    pub time_to_contact: Option<f64>,
    pub time_to_settle: Option<f64>,
    pub time_to_melt_onset: Option<f64>,
    pub time_to_removal: Option<f64>,
    pub end_time: f64,
    pub events: Vec<TimedEvent>,
}

impl RunReport {
    pub fn event_time(&self, event: Event) -> Option<f64> {
        self.events.iter().find(|e| e.event == event).map(|e| e.t)
    }
}

/// Aggregate over independent trials, ordered by trial index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub label: String,
    pub seed: u64,
    pub trials: usize,
    pub desolder_count: usize,
    pub grasp_count: usize,
    pub desolder_rate: f64,
    pub grasp_rate: f64,
    pub runs: Vec<RunReport>,
}

/// Stepping state of one scenario run.
pub struct Simulation {
    scenario: Scenario,
    controller: Controller,
    plant: PlantState,
    ctrl: ControllerState,
    wrench: ToolWrench,
    phase: Phase,
    phase_entered_step: u64,
    fz: SignalWindow,
    fy: SignalWindow,
    baseline: Option<f64>,
    melt_onset_seen: bool,
    early_motion_seen: bool,
    rng: ChaCha8Rng,
    events: Vec<TimedEvent>,
    max_steps: u64,
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let s = scenario.clone();
        let p = &s.plant;
        let start = s.tool_start.position();
        let capacity = s.detector.window_capacity(p.dt);
        Ok(Self {
            controller: Controller::new(s.controller.clone(), p.dt, p.v_max),
            plant: PlantState::initial(p, start),
            ctrl: ControllerState::holding(start),
            wrench: ToolWrench::ZERO,
            phase: Phase::APPROACH,
            phase_entered_step: 0,
            fz: SignalWindow::new(capacity)?,
            fy: SignalWindow::new(capacity)?,
            baseline: None,
            melt_onset_seen: false,
            early_motion_seen: false,
            rng: ChaCha8Rng::seed_from_u64(s.seed),
            events: Vec::new(),
            max_steps: (s.duration_cap_s / p.dt).ceil() as u64,
            scenario: s,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn plant(&self) -> &PlantState {
        &self.plant
    }

    pub fn is_finished(&self) -> bool {
        self.phase.is_terminal() || self.plant.step >= self.max_steps
    }

    /// The sample describing the current state with no events.
    pub fn sample(&self) -> TraceSample {
        let p = &self.plant;
        TraceSample {
            t: p.time,
            position: p.tool_position(),
            force: self.wrench.force,
            temperature: p.solder.temperature,
            melt_fraction: p.solder.melt_fraction,
            displacement: p.component.displacement,
            phase: self.phase.label(),
            events: Vec::new(),
        }
    }

    fn time_in_phase(&self) -> f64 {
        (self.plant.step - self.phase_entered_step) as f64 * self.scenario.plant.dt
    }

    fn detect(&mut self, stage: Stage) -> Vec<Event> {
        let s = &self.scenario;
        let det = &s.detector;
        let f_d = s.controller.f_d;
        let mut fired = Vec::new();
        match stage {
            Stage::Approach => {
                if self.baseline.is_none() {
                    self.baseline = contact_baseline(&self.fz, det);
                }
                if let Some(b) = self.baseline {
                    if detect_contact(&self.fz, b, det) {
                        fired.push(Event::ContactDetected);
                    }
                }
            }
            Stage::Contact => {
                if detect_settled(&self.fy, f_d, det) {
                    fired.push(Event::ForceSettled);
                }
            }
            Stage::Melting => {
                // entering Melting implies the force settled
                if !self.melt_onset_seen && detect_melt_onset(&self.fy, true, f_d, det) {
                    self.melt_onset_seen = true;
                    fired.push(Event::MeltOnset);
                }
                if detect_removal_complete(&self.plant.component, &self.plant.solder, det) {
                    fired.push(Event::RemovalComplete);
                }
            }
            Stage::Grasping => {
                if self.time_in_phase() >= det.grasp_close_s {
                    fired.push(detect_grasp_outcome(s.clearance_m(), &mut self.rng, &s.jam));
                }
            }
            Stage::Transport => {
                let d = (s.transport_pose().position - self.plant.tool_position()).norm();
                if d <= det.arrival_tol_m {
                    fired.push(Event::Arrived);
                }
            }
            Stage::Release => {
                if self.time_in_phase() >= det.release_s {
                    fired.push(Event::Released);
                }
            }
        }
        if !self.early_motion_seen && self.plant.component.moving && self.plant.solder.melt_fraction == 0.0 {
            self.early_motion_seen = true;
            fired.push(Event::EarlyMotion);
        }
        let transitions = fired.iter().any(|e| !e.is_annotation());
        if !transitions && self.time_in_phase() >= det.timeouts.for_stage(stage) {
            fired.push(Event::Timeout(stage));
        }
        fired
    }

    fn enter(&mut self, next: Phase) {
        match next {
            Phase::Active(Stage::Transport) => self.plant.component.grasped = true,
            Phase::Done => self.plant.component.grasped = false,
            _ => {}
        }
        self.phase = next;
        self.phase_entered_step = self.plant.step;
    }

    fn profile(&self) -> Result<PhaseProfile, PhaseError> {
        match self.phase {
            Phase::Active(_) => {
                let ctx = ProfileContext {
                    controller: &self.scenario.controller,
                    transport_target: self.scenario.transport_pose(),
                    time_in_phase: self.time_in_phase(),
                    tool_position: self.plant.tool_position(),
                };
                phase_profile(self.phase, &ctx)
            }
            // one final step after a terminal transition so the event gets a row
            _ => Ok(PhaseProfile {
                modes: [AxisMode::Hold; 3],
                heating_air_on: self.plant.heating_air_on,
                grasp_actuate: false,
                release_actuate: false,
                transport_target: None,
            }),
        }
    }

    /// Advances one step and returns the recorded sample, or `None` once the
    /// run has finished.
    pub fn step(&mut self) -> Result<Option<TraceSample>, SimError> {
        if self.is_finished() {
            return Ok(None);
        }
        let stage = self.phase.stage().expect("non-terminal while not finished");
        let fired = self.detect(stage);
        for &event in &fired {
            if self.phase.is_terminal() {
                break;
            }
            let next = transition(self.phase, event)?;
            if next != self.phase {
                self.enter(next);
            }
        }

        let profile = self.profile()?;
        let position = self.plant.tool_position();
        self.ctrl.set_modes(profile.modes, position);
        self.plant.heating_air_on = profile.heating_air_on;
        let (command, ctrl) = self.controller.step(&self.ctrl, &self.wrench, position);
        self.ctrl = ctrl;
        let (plant, wrench) = plant_step(&self.plant, command, &self.scenario.plant)?;
        self.plant = plant;
        self.wrench = wrench;
        self.fz.push(self.plant.time, wrench.force.z)?;
        self.fy.push(self.plant.time, wrench.force.y)?;

        let t = self.plant.time;
        self.events.extend(fired.iter().map(|&event| TimedEvent { event, t }));
        let mut sample = self.sample();
        sample.events = fired;
        Ok(Some(sample))
    }

    pub fn report(&self) -> RunReport {
        let at = |e: Event| self.events.iter().find(|x| x.event == e).map(|x| x.t);
        let onset = at(Event::ContactDetected);
        let since_onset = |e: Event| Some(at(e)? - onset?);
        let removal = since_onset(Event::RemovalComplete);
        let fault = match self.phase {
            Phase::Fault(r) => Some(r),
            _ => None,
        };
        RunReport {
            label: self.scenario.label.clone(),
            seed: self.scenario.seed,
            desolder_success: removal.is_some(),
            grasp_success: at(Event::GraspSecured).is_some(),
            early_motion: self.early_motion_seen,
            completed: self.phase == Phase::Done,
            final_phase: self.phase.to_string(),
            fault,
            heating_onset: onset,
            time_to_contact: onset,
            time_to_settle: since_onset(Event::ForceSettled),
            time_to_melt_onset: since_onset(Event::MeltOnset),
            time_to_removal: removal,
            end_time: self.plant.time,
            events: self.events.clone(),
        }
    }
}

fn simulate(scenario: &Scenario, record: bool) -> Result<(RunReport, Vec<TraceSample>), SimError> {
    let mut sim = Simulation::new(scenario)?;
    let mut trace = Vec::new();
    if record {
        trace.push(sim.sample());
    }
    while let Some(sample) = sim.step()? {
        if record {
            trace.push(sample);
        }
    }
    Ok((sim.report(), trace))
}

/// Runs one scenario to `Done`, a fault, or the duration cap.
pub fn run_scenario(scenario: &Scenario) -> Result<(RunReport, Vec<TraceSample>), SimError> {
    simulate(scenario, true)
}

/// Like [`run_scenario`] without keeping the trace.
pub fn run_scenario_report(scenario: &Scenario) -> Result<RunReport, SimError> {
    Ok(simulate(scenario, false)?.0)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index`: `splitmix64(seed ^ splitmix64(index))`.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

pub fn run_trial(scenario: &Scenario, index: u64) -> Result<RunReport, SimError> {
    let mut s = scenario.clone();
    s.seed = trial_seed(scenario.seed, index);
    run_scenario_report(&s)
}

/// Runs `trials` independent trials on up to `jobs` threads (`0` = all
/// cores). Results do not depend on `jobs`.
pub fn run_batch(scenario: &Scenario, trials: usize, jobs: usize) -> Result<BatchReport, SimError> {
    if trials == 0 {
        return Err(SimError::NoTrials);
    }
    scenario.validate()?;
    let runs = run_trials(scenario, trials, jobs)?;
    let desolder_count = runs.iter().filter(|r| r.desolder_success).count();
    let grasp_count = runs.iter().filter(|r| r.grasp_success).count();
    Ok(BatchReport {
        label: scenario.label.clone(),
        seed: scenario.seed,
        trials,
        desolder_count,
        grasp_count,
        desolder_rate: desolder_count as f64 / trials as f64,
        grasp_rate: grasp_count as f64 / trials as f64,
        runs,
    })
}

#[cfg(feature = "parallel")]
fn run_trials(scenario: &Scenario, trials: usize, jobs: usize) -> Result<Vec<RunReport>, SimError> {
    use rayon::prelude::*;
    let work = || {
        (0..trials as u64)
            .into_par_iter()
            .map(|i| run_trial(scenario, i))
            .collect::<Result<Vec<_>, _>>()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_trials(scenario: &Scenario, trials: usize, _jobs: usize) -> Result<Vec<RunReport>, SimError> {
    (0..trials as u64).map(|i| run_trial(scenario, i)).collect()
}
