//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export takes and returns JSON text. The plain functions below the
//! bindings carry the logic so they can be tested natively.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use desolder_sim::detector::jam_probability;
use desolder_sim::scenario::{parse_scenario, Scenario};
use desolder_sim::sim::{run_batch, run_scenario};
use desolder_sim::trace::TraceSample;

#[wasm_bindgen(js_name = libraryScenario)]
pub fn library_scenario_js(name: &str) -> Result<String, JsError> {
    library_scenario(name).map_err(|e| JsError::new(&e))
}

/// Runs a scenario; returns `{report, trace}` with at most `max_points`
/// trace rows (event rows always kept).
#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(scenario_json: &str, max_points: usize) -> Result<String, JsError> {
    simulate(scenario_json, max_points).map_err(|e| JsError::new(&e))
}

/// Measured and modelled grasp success at one clearance.
#[wasm_bindgen(js_name = graspRate)]
pub fn grasp_rate_js(scenario_json: &str, clearance_mm: f64, trials: usize) -> Result<String, JsError> {
    grasp_rate(scenario_json, clearance_mm, trials).map_err(|e| JsError::new(&e))
}

pub fn library_scenario(name: &str) -> Result<String, String> {
    Scenario::library(name).map(|s| s.to_json()).map_err(|e| e.to_string())
}

fn parse(scenario_json: &str) -> Result<Scenario, String> {
    parse_scenario(scenario_json).map_err(|e| e.to_string())
}

fn decimate(trace: &[TraceSample], max_points: usize) -> Vec<&TraceSample> {
    let stride = trace.len().div_ceil(max_points.max(2)).max(1);
    trace
        .iter()
        .enumerate()
        .filter(|(i, s)| i % stride == 0 || !s.events.is_empty() || *i + 1 == trace.len())
        .map(|(_, s)| s)
        .collect()
}

pub fn simulate(scenario_json: &str, max_points: usize) -> Result<String, String> {
    let s = parse(scenario_json)?;
    let (report, trace) = run_scenario(&s).map_err(|e| e.to_string())?;
    let rows = decimate(&trace, max_points);
    let col = |f: fn(&TraceSample) -> f64| rows.iter().map(|s| f(s)).collect::<Vec<_>>();
    let events: Vec<Value> = rows
        .iter()
        .filter(|s| !s.events.is_empty())
        .map(|s| json!({"t": s.t, "label": s.event_label()}))
        .collect();
    let out = json!({
        "report": report,
        "trace": {
            "t": col(|s| s.t),
            "fy": col(|s| s.force.y),
            "fz": col(|s| s.force.z),
            "T": col(|s| s.temperature),
            "phi": col(|s| s.melt_fraction),
            "disp_mm": col(|s| s.displacement * 1e3),
            "phase": rows.iter().map(|s| s.phase.to_string()).collect::<Vec<_>>(),
            "events": events,
        },
    });
    Ok(out.to_string())
}

pub fn grasp_rate(scenario_json: &str, clearance_mm: f64, trials: usize) -> Result<String, String> {
    let mut s = parse(scenario_json)?;
    s.component.clearance_mm = clearance_mm;
    s.validate().map_err(|e| e.to_string())?;
    let batch = run_batch(&s, trials, 1).map_err(|e| e.to_string())?;
    let out = json!({
        "clearance_mm": clearance_mm,
        "trials": batch.trials,
        "grasp_rate": batch.grasp_rate,
        "desolder_rate": batch.desolder_rate,
        "model": 1.0 - jam_probability(s.clearance_m(), &s.jam),
    });
    Ok(out.to_string())
}
