//! wasm-bindgen surface for the browser demo: solve a scenario with either
//! solver and hand back plot-ready polylines for the cumulative curves.
//!
//! Every function takes and returns JSON strings so the page needs no glue
//! types: a scenario uses the same schema as the CLI files.

use ehsched::curves::Side;
use ehsched::{baseline, scheduler, validate, Scenario, SolveOutcome};
use wasm_bindgen::prelude::*;

/// Solves `scenario_json` with the optimal solver and returns a JSON
/// object: `{status, schedule?, witness?, curves?, checks?}`.
#[wasm_bindgen]
pub fn solve_optimal(scenario_json: &str) -> String {
    run(scenario_json, SolverKind::Optimal)
}

/// Same as [`solve_optimal`] but runs the empty-buffers baseline.
#[wasm_bindgen]
pub fn solve_ebs(scenario_json: &str) -> String {
    run(scenario_json, SolverKind::Ebs)
}

/// Returns the scenario's input curves (data arrivals, quality floor,
/// harvested energy) as step polylines for plotting, without solving.
#[wasm_bindgen]
pub fn scenario_curves(scenario_json: &str) -> String {
    let sc: Scenario = match serde_json::from_str(scenario_json) {
        Ok(sc) => sc,
        Err(e) => return error_json(&format!("bad scenario: {e}")),
    };
    let horizon = plot_horizon(&sc, None);
    serde_json::json!({
        "status": "ok",
        "horizon": horizon,
        "total_data": sc.total_data(),
        "total_energy": sc.total_energy(),
        "c_max": sc.c_max,
        "arrivals": staircase_points(&sc, horizon, CurvePick::Data),
        "quality": staircase_points(&sc, horizon, CurvePick::Qos),
        "harvested": staircase_points(&sc, horizon, CurvePick::Energy),
    })
    .to_string()
}

enum SolverKind {
    Optimal,
    Ebs,
}

enum CurvePick {
    Data,
    Qos,
    Energy,
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "status": "error", "message": msg }).to_string()
}

fn run(scenario_json: &str, kind: SolverKind) -> String {
    let sc: Scenario = match serde_json::from_str(scenario_json) {
        Ok(sc) => sc,
        Err(e) => return error_json(&format!("bad scenario: {e}")),
    };
    let outcome = match kind {
        SolverKind::Optimal => scheduler::solve(&sc),
        SolverKind::Ebs => baseline::ebs_solve(&sc),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => return error_json(&format!("solver error: {e}")),
    };
    match outcome {
        SolveOutcome::Feasible(s) => {
            let horizon = plot_horizon(&sc, Some(s.completion_time));
            let report = validate(&sc, &s);
            serde_json::json!({
                "status": "feasible",
                "schedule": s,
                "completion_time": s.completion_time,
                "departure": departure_points(&s, horizon),
                "battery": battery_points(&sc, &s, horizon),
                "arrivals": staircase_points(&sc, horizon, CurvePick::Data),
                "quality": staircase_points(&sc, horizon, CurvePick::Qos),
                "horizon": horizon,
                "total_data": sc.total_data(),
                "c_max": sc.c_max,
                "checks": report.checks.iter().map(|c| {
                    serde_json::json!({ "name": c.name, "passed": c.passed, "detail": c.detail })
                }).collect::<Vec<_>>(),
            })
            .to_string()
        }
        SolveOutcome::Infeasible(w) => serde_json::json!({
            "status": "infeasible",
            "witness": w,
        })
        .to_string(),
    }
}

fn plot_horizon(sc: &Scenario, completion: Option<f64>) -> f64 {
    let last = sc.last_event_time();
    let t = completion.unwrap_or(0.0).max(last).max(1e-3);
    t * 1.05
}

/// Samples a staircase as (t, value) pairs with doubled points at jumps so a
/// polyline renders clean vertical steps.
fn staircase_points(sc: &Scenario, horizon: f64, pick: CurvePick) -> Vec<(f64, f64)> {
    let energy_curve;
    let curve = match pick {
        CurvePick::Data => sc.data_curve(),
        CurvePick::Qos => sc.qos_curve(),
        CurvePick::Energy => {
            energy_curve =
                ehsched::curves::Staircase::new(0.0, sc.energy_packets().iter().copied());
            &energy_curve
        }
    };
    let mut pts = vec![(0.0, curve.eval(0.0, Side::Left))];
    for &(t, _) in curve.jumps() {
        if t > horizon {
            break;
        }
        pts.push((t, curve.eval(t, Side::Left)));
        pts.push((t, curve.eval(t, Side::Right)));
    }
    pts.push((horizon, curve.eval(horizon, Side::Right)));
    pts
}

fn departure_points(s: &ehsched::Schedule, horizon: f64) -> Vec<(f64, f64)> {
    let mut pts = vec![(0.0, 0.0)];
    for ep in &s.epochs {
        pts.push((ep.end(), s.departed(ep.end())));
    }
    pts.push((horizon, s.departed(s.completion_time)));
    pts
}

/// Battery level over time: breakpoints at epoch ends and arrivals, with the
/// overflow-capped refills applied.
fn battery_points(sc: &Scenario, s: &ehsched::Schedule, horizon: f64) -> Vec<(f64, f64)> {
    let mut times: Vec<f64> = vec![0.0, s.completion_time, horizon];
    for ep in &s.epochs {
        times.push(ep.start);
        times.push(ep.end());
    }
    for &(e, _) in sc.energy_packets() {
        if e <= horizon {
            times.push(e);
        }
    }
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let level_at = |t: f64, include_arrival: bool| -> f64 {
        let harvested: f64 = sc
            .energy_packets()
            .iter()
            .filter(|&&(e, _)| if include_arrival { e <= t } else { e < t })
            .map(|(_, amt)| amt)
            .sum();
        let spilled: f64 = s
            .overflows
            .iter()
            .filter(|&&(ot, _)| if include_arrival { ot <= t } else { ot < t })
            .map(|(_, o)| o)
            .sum();
        let spent = s.spent(&sc.model, t.min(s.completion_time));
        (harvested - spilled - spent).max(0.0)
    };

    let mut pts = Vec::with_capacity(times.len() * 2);
    for &t in &times {
        let arrives = sc
            .energy_packets()
            .iter()
            .any(|&(e, _)| (e - t).abs() < 1e-12);
        if arrives && t > 0.0 {
            pts.push((t, level_at(t, false)));
        }
        pts.push((t, level_at(t, true)));
    }
    pts
}
