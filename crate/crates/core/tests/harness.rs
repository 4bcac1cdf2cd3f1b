use desolder_sim::detector::Event;
use desolder_sim::phase::{FaultReason, Phase, PhaseLabel, Stage};
use desolder_sim::sim::{run_batch, run_scenario, run_scenario_report, run_trial, Simulation};
use desolder_sim::trace::TraceSample;
use desolder_sim::Scenario;

fn lib(name: &str) -> Scenario {
    Scenario::library(name).unwrap()
}

fn rows_with(trace: &[TraceSample], event: Event) -> Vec<&TraceSample> {
    trace.iter().filter(|s| s.events.contains(&event)).collect()
}

#[test]
fn no_heat_times_out_in_melting() {
    let (r, trace) = run_scenario(&lib("no_heat")).unwrap();
    assert_eq!(r.fault, Some(FaultReason::Timeout(Stage::Melting)));
    assert!(!r.desolder_success && !r.completed);
    assert_eq!(r.time_to_removal, None);
    assert!(trace.iter().all(|s| s.melt_fraction == 0.0));
    assert_eq!(trace.last().unwrap().phase, PhaseLabel::Fault);
}

#[test]
fn weak_joint_moves_early_but_removal_waits_for_melt() {
    let mut s = lib("nominal_chip");
    s.plant.f_break = 15.0;
    let (r, trace) = run_scenario(&s).unwrap();
    assert!(r.early_motion);
    let early = rows_with(&trace, Event::EarlyMotion);
    assert_eq!(early.len(), 1);
    assert_eq!(early[0].melt_fraction, 0.0);

    let removal = rows_with(&trace, Event::RemovalComplete)[0];
    assert!(removal.melt_fraction >= s.detector.phi_min);
    let far_enough = trace
        .iter()
        .find(|x| x.displacement >= s.detector.d_rm)
        .unwrap();
    assert!(far_enough.t < removal.t, "displacement threshold reached before the melt gate");
    assert!(r.desolder_success);
}

#[test]
fn nominal_mobile_chip_with_a_clean_grasp() {
    let base = lib("mobilephone_chip");
    let r = (0..64)
        .map(|seed| run_scenario_report(&Scenario { seed, ..base.clone() }).unwrap())
        .find(|r| r.grasp_success)
        .expect("some seed grasps cleanly");
    assert!(r.completed && r.desolder_success);
    let t = r.time_to_removal.unwrap();
    assert!((t - 10.0).abs() <= 1.0, "{t}");
}

#[test]
fn removal_time_present_iff_success() {
    for name in desolder_sim::scenario::LIBRARY {
        let r = run_scenario_report(&lib(name)).unwrap();
        assert_eq!(r.time_to_removal.is_some(), r.desolder_success, "{name}");
    }
}

#[test]
fn single_trial_batch_matches_its_run() {
    let s = lib("mobilephone_chip");
    let b = run_batch(&s, 1, 1).unwrap();
    let r = run_trial(&s, 0).unwrap();
    assert_eq!(b.runs, vec![r.clone()]);
    assert_eq!(b.desolder_count, r.desolder_success as usize);
    assert_eq!(b.grasp_count, r.grasp_success as usize);
    assert_eq!(b.desolder_rate, b.desolder_count as f64);
    assert_eq!(b.grasp_rate, b.grasp_count as f64);
}

#[test]
fn trial_outcome_independent_of_order_and_jobs() {
    let s = lib("mobilephone_chip");
    let b1 = run_batch(&s, 24, 1).unwrap();
    let b3 = run_batch(&s, 24, 3).unwrap();
    assert_eq!(b1, b3);
    for i in (0..24).rev() {
        assert_eq!(run_trial(&s, i as u64).unwrap(), b1.runs[i]);
    }
}

#[test]
fn repeated_runs_are_identical() {
    let s = lib("nominal_chip");
    let a = run_scenario(&s).unwrap();
    let b = run_scenario(&s).unwrap();
    assert_eq!(a, b);
}

#[test]
fn phase_column_is_monotone_for_successful_runs() {
    for name in ["nominal_chip", "small_component"] {
        let (r, trace) = run_scenario(&lib(name)).unwrap();
        assert!(r.completed, "{name}");
        for w in trace.windows(2) {
            assert!(w[0].phase.ordinal() <= w[1].phase.ordinal(), "{name} at {}", w[1].t);
        }
        assert_eq!(trace.last().unwrap().phase, PhaseLabel::Done);
    }
}

#[test]
fn every_event_is_a_transition_or_annotation() {
    for name in desolder_sim::scenario::LIBRARY {
        let (_, trace) = run_scenario(&lib(name)).unwrap();
        for w in trace.windows(2) {
            let (prev, cur) = (&w[0], &w[1]);
            let driving: Vec<_> = cur.events.iter().filter(|e| !e.is_annotation()).collect();
            if prev.phase != cur.phase {
                assert_eq!(driving.len(), 1, "{name}: phase change at {} without one event", cur.t);
            } else {
                assert!(driving.is_empty(), "{name}: orphan {:?} at {}", driving, cur.t);
            }
        }
    }
}

#[test]
fn hot_air_only_while_pushing() {
    let mut sim = Simulation::new(&lib("nominal_chip")).unwrap();
    while let Some(sample) = sim.step().unwrap() {
        if let Phase::Active(stage) = sim.phase() {
            let expected = matches!(stage, Stage::Contact | Stage::Melting);
            assert_eq!(sim.plant().heating_air_on, expected, "{stage} at {}", sample.t);
        }
    }
    assert_eq!(sim.phase(), Phase::Done);
}

#[test]
fn duration_cap_stops_the_run() {
    let mut s = lib("no_heat");
    s.duration_cap_s = 5.0;
    let r = run_scenario_report(&s).unwrap();
    assert!(!r.completed);
    assert_eq!(r.fault, None);
    assert!((r.end_time - 5.0).abs() < 1e-9);
}

#[test]
fn halving_dt_keeps_removal_time() {
    let s = lib("nominal_chip");
    let mut fine = s.clone();
    fine.apply_dt_override("500").unwrap();
    let a = run_scenario_report(&s).unwrap().time_to_removal.unwrap();
    let b = run_scenario_report(&fine).unwrap().time_to_removal.unwrap();
    assert!((a - b).abs() / a < 0.01, "{a} vs {b}");
}
