//! Force-signature and state detectors that turn signals into process events.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{non_negative, positive, require, ValidationError};
use crate::model::{mean_about_first, SignalWindow};
use crate::phase::Stage;
use crate::plant::{ComponentState, SolderState};

/// Discrete process event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Event {
    ContactDetected,
    ForceSettled,
    /// Annotation: the regulated push force dropped as the joints yielded.
    MeltOnset,
    /// Annotation: the component started sliding before the solder melted.
    EarlyMotion,
    RemovalComplete,
    GraspSecured,
    GraspFailed,
    Arrived,
    Released,
    Timeout(Stage),
}

impl Event {
    /// Annotations are recorded in the trace but never drive a transition.
    pub fn is_annotation(self) -> bool {
        matches!(self, Event::MeltOnset | Event::EarlyMotion)
    }

    pub const ALL: [Event; 15] = [
        Event::ContactDetected,
        Event::ForceSettled,
        Event::MeltOnset,
        Event::EarlyMotion,
        Event::RemovalComplete,
        Event::GraspSecured,
        Event::GraspFailed,
        Event::Arrived,
        Event::Released,
        Event::Timeout(Stage::Approach),
        Event::Timeout(Stage::Contact),
        Event::Timeout(Stage::Melting),
        Event::Timeout(Stage::Grasping),
        Event::Timeout(Stage::Transport),
        Event::Timeout(Stage::Release),
    ];
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Timeout(stage) => write!(f, "Timeout({stage})"),
            other => write!(f, "{other:?}"),
        }
    }
}

/// An event with the simulation time it was recorded at [s].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub event: Event,
    pub t: f64,
}

/// Maximum time allowed in each phase before a timeout fault [s].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseTimeouts {
    pub approach: f64,
    pub contact: f64,
    pub melting: f64,
    pub grasping: f64,
    pub transport: f64,
    pub release: f64,
}

impl Default for PhaseTimeouts {
    fn default() -> Self {
        Self {
            approach: 10.0,
            contact: 5.0,
            melting: 30.0,
            grasping: 2.0,
            transport: 10.0,
            release: 2.0,
        }
    }
}

impl PhaseTimeouts {
    pub fn for_stage(&self, stage: Stage) -> f64 {
        match stage {
            Stage::Approach => self.approach,
            Stage::Contact => self.contact,
            Stage::Melting => self.melting,
            Stage::Grasping => self.grasping,
            Stage::Transport => self.transport,
            Stage::Release => self.release,
        }
    }

    pub fn total(&self) -> f64 {
        Stage::ALL.iter().map(|&s| self.for_stage(s)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Contact threshold on |f_z - baseline| [N].
    pub theta_c: f64,
    /// Consecutive samples required above threshold.
    #[serde(rename = "N_c")]
    pub n_c: usize,
    /// Horizon of the pre-contact baseline mean [s].
    pub baseline_horizon_s: f64,
    /// Settle tolerance around f_d [N].
    pub eps_f: f64,
    /// Time the force must stay within tolerance [s].
    pub t_settle: f64,
    /// Melt-dip ratio: onset when |f_y| < alpha * |f_d|.
    pub alpha: f64,
    /// Slide distance that counts as removed [m].
    pub d_rm: f64,
    pub phi_min: f64,
    /// Gripper closing time before the grasp outcome is known [s].
    pub grasp_close_s: f64,
    /// Gripper opening time [s].
    pub release_s: f64,
    /// Distance to the transport target that counts as arrived [m].
    pub arrival_tol_m: f64,
    pub timeouts: PhaseTimeouts,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            theta_c: 2.0,
            n_c: 10,
            baseline_horizon_s: 0.05,
            eps_f: 0.5,
            t_settle: 0.2,
            alpha: 0.7,
            d_rm: 5e-3,
            phi_min: 0.95,
            grasp_close_s: 0.3,
            release_s: 0.2,
            arrival_tol_m: 1e-3,
            timeouts: PhaseTimeouts::default(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        positive(self.theta_c, "theta_c")?;
        require(self.n_c >= 1, "N_c", "must be >= 1")?;
        positive(self.baseline_horizon_s, "baseline_horizon_s")?;
        positive(self.eps_f, "eps_f")?;
        positive(self.t_settle, "t_settle")?;
        require(self.alpha > 0.0 && self.alpha < 1.0, "alpha", "must lie in (0, 1)")?;
        positive(self.d_rm, "d_rm")?;
        require((0.0..=1.0).contains(&self.phi_min), "phi_min", "must lie in [0, 1]")?;
        non_negative(self.grasp_close_s, "grasp_close_s")?;
        non_negative(self.release_s, "release_s")?;
        positive(self.arrival_tol_m, "arrival_tol_m")?;
        for stage in Stage::ALL {
            let name = format!("timeouts.{}", stage.key());
            let v = self.timeouts.for_stage(stage);
            require(v.is_finite() && v > 0.0, &name, "must be finite and > 0")?;
        }
        Ok(())
    }

    /// Window length in samples needed to evaluate every detector at step `dt`.
    pub fn window_capacity(&self, dt: f64) -> usize {
        let horizon = self.baseline_horizon_s.max(self.t_settle);
        (horizon / dt).ceil() as usize + self.n_c + 2
    }
}

/// Clearance-dependent grasp jam model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JamParams {
    /// Jam probability at zero clearance.
    pub p0: f64,
    /// Reduction of jam probability per millimetre of clearance.
    pub beta_per_mm: f64,
}

impl Default for JamParams {
    fn default() -> Self {
        Self {
            p0: 0.6,
            beta_per_mm: 0.1,
        }
    }
}

impl JamParams {
    pub fn validate(&self) -> Result<(), ValidationError> {
        require((0.0..=1.0).contains(&self.p0), "p0", "must lie in [0, 1]")?;
        non_negative(self.beta_per_mm, "beta_per_mm")
    }
}

/// Mean of the oldest `baseline_horizon_s` of the window: the free-air
/// reading before any contact. `None` until the window spans the horizon.
pub fn contact_baseline(fz: &SignalWindow, cfg: &DetectorConfig) -> Option<f64> {
    let (t_first, _) = fz.iter().next()?;
    let (t_last, _) = fz.latest()?;
    if t_last - t_first < cfg.baseline_horizon_s {
        return None;
    }
    let cutoff = t_first + cfg.baseline_horizon_s;
    mean_about_first(fz.iter().take_while(|&(t, _)| t <= cutoff).map(|(_, v)| v))
}

/// True when the latest `N_c` samples all deviate from `baseline` by more
/// than `theta_c`.
pub fn detect_contact(fz: &SignalWindow, baseline: f64, cfg: &DetectorConfig) -> bool {
    fz.len() >= cfg.n_c && fz.recent(cfg.n_c).all(|(_, v)| (v - baseline).abs() > cfg.theta_c)
}

/// True when every sample in the trailing `t_settle` lies within `eps_f` of
/// `f_d` and the window actually spans that long.
pub fn detect_settled(fy: &SignalWindow, f_d: f64, cfg: &DetectorConfig) -> bool {
    let (Some((t_first, _)), Some((t_last, _))) = (fy.iter().next(), fy.latest()) else {
        return false;
    };
    // small slack so a span of exactly t_settle counts at any dt
    let slack = 1e-9 * t_last.abs().max(1.0);
    if t_last - t_first + slack < cfg.t_settle {
        return false;
    }
    let cutoff = t_last - cfg.t_settle - slack;
    fy.iter()
        .rev()
        .take_while(|&(t, _)| t >= cutoff)
        .all(|(_, v)| (v - f_d).abs() <= cfg.eps_f)
}

/// True when, after the force has settled, the latest push force has dropped
/// below `alpha * |f_d|`.
pub fn detect_melt_onset(fy: &SignalWindow, settled: bool, f_d: f64, cfg: &DetectorConfig) -> bool {
    if !settled {
        return false;
    }
    fy.latest()
        .is_some_and(|(_, v)| v.abs() < cfg.alpha * f_d.abs())
}

pub fn detect_removal_complete(component: &ComponentState, solder: &SolderState, cfg: &DetectorConfig) -> bool {
    component.displacement >= cfg.d_rm && solder.melt_fraction >= cfg.phi_min
}

/// Jam probability `clamp(p0 - beta * clearance_mm, 0, 1)`.
pub fn jam_probability(clearance_m: f64, jam: &JamParams) -> f64 {
    (jam.p0 - jam.beta_per_mm * clearance_m * 1e3).clamp(0.0, 1.0)
}

/// Draws one Bernoulli jam from `rng`.
pub fn detect_grasp_outcome<R: Rng + ?Sized>(clearance_m: f64, rng: &mut R, jam: &JamParams) -> Event {
    if rng.random_bool(jam_probability(clearance_m, jam)) {
        Event::GraspFailed
    } else {
        Event::GraspSecured
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn window_of(values: &[f64]) -> SignalWindow {
        let mut w = SignalWindow::new(values.len().max(1) + 8).unwrap();
        for (i, &v) in values.iter().enumerate() {
            w.push(i as f64 * 1e-3, v).unwrap();
        }
        w
    }

    #[test]
    fn flat_signal_is_not_contact() {
        let cfg = DetectorConfig::default();
        assert!(!detect_contact(&window_of(&[0.0; 60]), 0.0, &cfg));
    }

    #[test]
    fn sustained_step_fires_on_tenth_sample() {
        let cfg = DetectorConfig::default();
        let mut values = vec![0.0; 40];
        for k in 1..=12 {
            values.push(-5.0);
            let fired = detect_contact(&window_of(&values), 0.0, &cfg);
            assert_eq!(fired, k >= 10, "post-step sample {k}");
        }
    }

    #[test]
    fn short_spike_is_debounced() {
        let cfg = DetectorConfig::default();
        let mut values = vec![0.0; 40];
        values.extend([-5.0; 3]);
        values.extend([0.0; 20]);
        for end in 40..values.len() {
            assert!(!detect_contact(&window_of(&values[..=end]), 0.0, &cfg));
        }
    }

    #[test]
    fn too_few_samples_is_not_contact() {
        let cfg = DetectorConfig::default();
        assert!(!detect_contact(&window_of(&[-5.0; 9]), 0.0, &cfg));
    }

    #[test]
    fn baseline_from_oldest_samples() {
        let cfg = DetectorConfig::default();
        assert_eq!(contact_baseline(&window_of(&[1.5; 30]), &cfg), None);
        let mut values = vec![1.5; 51];
        values.extend([-8.0; 20]);
        assert_eq!(contact_baseline(&window_of(&values), &cfg), Some(1.5));
        values.extend([-8.0; 10]);
        assert!(detect_contact(&window_of(&values), 1.5, &cfg));
    }

    #[test]
    fn settle_requires_full_span_in_band() {
        let cfg = DetectorConfig::default();
        assert!(!detect_settled(&window_of(&[-20.0; 100]), -20.0, &cfg));
        assert!(detect_settled(&window_of(&[-20.0; 201]), -20.0, &cfg));
        let mut v = vec![-20.0; 250];
        v[200] = -19.0;
        assert!(!detect_settled(&window_of(&v), -20.0, &cfg));
    }

    #[test]
    fn melt_onset_rule() {
        let cfg = DetectorConfig::default();
        assert!(!detect_melt_onset(&window_of(&[-20.0, -19.8]), true, -20.0, &cfg));
        assert!(detect_melt_onset(&window_of(&[-20.0, -12.0]), true, -20.0, &cfg));
        assert!(!detect_melt_onset(&window_of(&[-5.0]), false, -20.0, &cfg));
    }

    #[test]
    fn removal_gates() {
        let cfg = DetectorConfig::default();
        let solder = |phi| SolderState {
            temperature: 183.0,
            melt_fraction: phi,
            latent_budget: 273.0,
        };
        let comp = |d| ComponentState {
            displacement: d,
            moving: true,
            ..ComponentState::default()
        };
        assert!(detect_removal_complete(&comp(5e-3), &solder(1.0), &cfg));
        assert!(!detect_removal_complete(&comp(5e-3), &solder(0.5), &cfg));
        assert!(!detect_removal_complete(&comp(0.0), &solder(1.0), &cfg));
    }

    #[test]
    fn wide_clearance_never_jams() {
        let jam = JamParams::default();
        assert_eq!(jam_probability(6e-3, &jam), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            assert_eq!(detect_grasp_outcome(6e-3, &mut rng, &jam), Event::GraspSecured);
        }
    }

    #[test]
    fn one_millimetre_clearance_fails_about_half() {
        let jam = JamParams::default();
        assert!((jam_probability(1e-3, &jam) - 0.5).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let failures = (0..1000)
            .filter(|_| detect_grasp_outcome(1e-3, &mut rng, &jam) == Event::GraspFailed)
            .count();
        // binomial(1000, 0.5) 95% interval
        assert!((468..=532).contains(&failures), "failures {failures}");
    }

    #[test]
    fn grasp_outcome_repeats_per_seed() {
        let jam = JamParams::default();
        for seed in 0..50 {
            let a = detect_grasp_outcome(1e-3, &mut ChaCha8Rng::seed_from_u64(seed), &jam);
            let b = detect_grasp_outcome(1e-3, &mut ChaCha8Rng::seed_from_u64(seed), &jam);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn event_labels() {
        assert_eq!(Event::ContactDetected.to_string(), "ContactDetected");
        assert_eq!(Event::Timeout(Stage::Melting).to_string(), "Timeout(Melting)");
    }

    proptest! {
        #[test]
        fn raising_threshold_never_adds_contact(values in prop::collection::vec(-10.0..10.0f64, 0..80),
                                                lo in 0.1..5.0f64, extra in 0.0..5.0f64) {
            let w = window_of(&values);
            let low = DetectorConfig { theta_c: lo, ..DetectorConfig::default() };
            let high = DetectorConfig { theta_c: lo + extra, ..DetectorConfig::default() };
            prop_assert!(!detect_contact(&w, 0.0, &high) || detect_contact(&w, 0.0, &low));
        }

        #[test]
        fn spikes_shorter_than_debounce_never_fire(len in 1usize..10, amp in 2.5..50.0f64, pre in 12usize..60) {
            let cfg = DetectorConfig::default();
            let mut values = vec![0.0; pre];
            values.extend(std::iter::repeat_n(-amp, len));
            values.extend([0.0; 15]);
            for end in 0..values.len() {
                prop_assert!(!detect_contact(&window_of(&values[..=end]), 0.0, &cfg));
            }
        }

        #[test]
        fn melt_onset_gated_by_settle(values in prop::collection::vec(-30.0..30.0f64, 1..20)) {
            prop_assert!(!detect_melt_onset(&window_of(&values), false, -20.0, &DetectorConfig::default()));
        }

        #[test]
        fn jam_probability_monotone_in_clearance(a in 0.0..0.02f64, b in 0.0..0.02f64,
                                                 p0 in 0.0..=1.0f64, beta in 0.0..1.0f64) {
            let jam = JamParams { p0, beta_per_mm: beta };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(jam_probability(hi, &jam) <= jam_probability(lo, &jam));
        }
    }
}
