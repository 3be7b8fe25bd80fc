//! Independent schedule verification: replays a schedule against the raw
//! scenario and reports every constraint and optimality-structure check with
//! a pass/fail verdict. Nothing here shares state with the solver.

use crate::curves::{times_equal, Side};
use crate::scenario::Scenario;
use crate::scheduler::Schedule;
use serde::Serialize;
use std::fmt;

/// Feasibility checks apply to any schedule; structure checks hold only for
/// minimum-completion-time output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tier {
    Constraint,
    Optimality,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub tier: Tier,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn constraints_passed(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| c.tier == Tier::Constraint)
            .all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "[{mark}] {:<28} {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

const TOL: f64 = 1e-6;

struct Ctx<'a> {
    sc: &'a Scenario,
    s: &'a Schedule,
    checks: Vec<CheckResult>,
}

impl Ctx<'_> {
    fn push(&mut self, name: &'static str, tier: Tier, passed: bool, detail: String) {
        self.checks.push(CheckResult {
            name,
            tier,
            passed,
            detail,
        });
    }

    fn tol_bits(&self) -> f64 {
        TOL * self.sc.total_data().max(1.0)
    }

    fn tol_energy(&self) -> f64 {
        TOL * self.sc.total_energy().max(self.sc.c_max).max(1.0)
    }

    /// Recorded overflow at instant `t` (0 when none).
    fn recorded_overflow_at(&self, t: f64) -> f64 {
        self.s
            .overflows
            .iter()
            .filter(|(ot, _)| times_equal(*ot, t))
            .map(|(_, o)| o)
            .sum()
    }
}

/// Replays `schedule` against `scenario` and reports every check.
pub fn validate(sc: &Scenario, s: &Schedule) -> ValidationReport {
    let mut ctx = Ctx {
        sc,
        s,
        checks: Vec::new(),
    };
    check_structure(&mut ctx);
    check_energy_causality(&mut ctx);
    check_data_causality(&mut ctx);
    check_quality_floor(&mut ctx);
    check_completion(&mut ctx);
    check_battery_empty_at_end(&mut ctx);
    check_overflow_buffer_idle(&mut ctx);
    check_rate_changes(&mut ctx);
    ValidationReport { checks: ctx.checks }
}

fn check_structure(ctx: &mut Ctx) {
    let s = ctx.s;
    let mut ok = true;
    let mut detail = String::from("epochs contiguous from 0, positive lengths, total matches T");
    let mut cursor = 0.0;
    for (i, ep) in s.epochs.iter().enumerate() {
        if !(ep.len > 0.0) || ep.rate < 0.0 || !times_equal(ep.start, cursor) {
            ok = false;
            detail = format!(
                "epoch {i} malformed: start {} (expected {cursor}), rate {}, len {}",
                ep.start, ep.rate, ep.len
            );
            break;
        }
        cursor = ep.end();
    }
    if ok && !times_equal(cursor, s.completion_time) {
        ok = false;
        detail = format!(
            "epoch lengths sum to {cursor}, completion time says {}",
            s.completion_time
        );
    }
    if ok {
        for &(t, o) in &s.overflows {
            let is_arrival = ctx
                .sc
                .energy_packets()
                .iter()
                .any(|&(e, _)| times_equal(e, t));
            if !is_arrival || o <= 0.0 {
                ok = false;
                detail = format!("overflow record ({t}, {o}) does not match an energy arrival");
                break;
            }
        }
    }
    ctx.push("structure", Tier::Constraint, ok, detail);
}

/// Battery replay: never below zero, never above capacity, and every recorded
/// overflow equals the spill the replay predicts at that arrival.
fn check_energy_causality(ctx: &mut Ctx) {
    let (sc, s) = (ctx.sc, ctx.s);
    let tol = ctx.tol_energy();
    let t_end = s.completion_time;
    let mut b = 0.0;
    let mut prev = 0.0;
    let mut ok = true;
    let mut detail = format!("battery within [0, {}] throughout", sc.c_max);
    for &(e, amt) in sc.energy_packets() {
        if e > t_end && !times_equal(e, t_end) {
            break;
        }
        b -= s.spent(&sc.model, e) - s.spent(&sc.model, prev);
        prev = e;
        if b < -tol {
            ok = false;
            detail = format!("battery at {b:.9} J just before t = {e}");
            break;
        }
        let expected_spill = (b + amt - sc.c_max).max(0.0);
        let recorded = ctx.recorded_overflow_at(e);
        if (expected_spill - recorded).abs() > tol {
            ok = false;
            detail = format!(
                "overflow at t = {e}: replay expects {expected_spill:.9} J, schedule records {recorded:.9} J"
            );
            break;
        }
        b = b + amt - recorded;
        if b > sc.c_max + tol {
            ok = false;
            detail = format!("battery {b:.9} J above capacity just after t = {e}");
            break;
        }
    }
    if ok {
        b -= s.spent(&sc.model, t_end) - s.spent(&sc.model, prev);
        if b < -tol {
            ok = false;
            detail = format!("battery at {b:.9} J by the completion time");
        }
    }
    ctx.push("energy-causality", Tier::Constraint, ok, detail);
}

fn check_data_causality(ctx: &mut Ctx) {
    let (sc, s) = (ctx.sc, ctx.s);
    let tol = ctx.tol_bits();
    let mut ok = true;
    let mut detail = String::from("departure never exceeds arrivals");
    for &(d, _) in sc.data_packets() {
        if d > s.completion_time {
            break;
        }
        let sent = s.departed(d);
        let arrived = sc.data_curve().eval(d, Side::Left);
        if sent > arrived + tol {
            ok = false;
            detail = format!("at t = {d}: departed {sent:.9} > arrived {arrived:.9}");
            break;
        }
    }
    if ok {
        let sent = s.departed(s.completion_time);
        let arrived = sc.data_curve().eval(s.completion_time, Side::Right);
        if sent > arrived + tol {
            ok = false;
            detail = format!("at completion: departed {sent:.9} > arrived {arrived:.9}");
        }
    }
    ctx.push("data-causality", Tier::Constraint, ok, detail);
}

fn check_quality_floor(ctx: &mut Ctx) {
    let (sc, s) = (ctx.sc, ctx.s);
    let tol = ctx.tol_bits();
    let mut ok = true;
    let mut detail = String::from("every quality floor met on time");
    for &(q, _) in sc.qos_curve().jumps() {
        if q > s.completion_time && !times_equal(q, s.completion_time) {
            continue;
        }
        let required = sc.qos_curve().eval(q, Side::Right);
        let sent = s.departed(q);
        if sent < required - tol {
            ok = false;
            detail = format!("at t = {q}: departed {sent:.9} < required {required:.9}");
            break;
        }
    }
    ctx.push("quality-floor", Tier::Constraint, ok, detail);
}

fn check_completion(ctx: &mut Ctx) {
    let sent = ctx.s.departed(ctx.s.completion_time);
    let total = ctx.sc.total_data();
    let ok = (sent - total).abs() <= ctx.tol_bits();
    ctx.push(
        "completion",
        Tier::Constraint,
        ok,
        format!(
            "departed {sent:.9} of {total:.9} bits by T = {}",
            ctx.s.completion_time
        ),
    );
}

/// At the completion instant every usable Joule must be gone (arrivals landing
/// exactly at T cannot be spent and are not counted).
fn check_battery_empty_at_end(ctx: &mut Ctx) {
    let (sc, s) = (ctx.sc, ctx.s);
    let t_end = s.completion_time;
    let usable: f64 = sc
        .energy_packets()
        .iter()
        .filter(|&&(e, _)| e < t_end && !times_equal(e, t_end))
        .map(|(_, amt)| amt)
        .sum();
    let spilled: f64 = s
        .overflows
        .iter()
        .filter(|&&(t, _)| t < t_end && !times_equal(t, t_end))
        .map(|(_, o)| o)
        .sum();
    let spent = s.spent(&sc.model, t_end);
    let leftover = usable - spilled - spent;
    let ok = leftover.abs() <= ctx.tol_energy();
    ctx.push(
        "battery-empty-at-end",
        Tier::Optimality,
        ok,
        format!("{leftover:.9} J left unspent at T"),
    );
}

/// Overflows are only allowed when the buffer is already drained.
fn check_overflow_buffer_idle(ctx: &mut Ctx) {
    let (sc, s) = (ctx.sc, ctx.s);
    let tol = ctx.tol_bits();
    let mut ok = true;
    let mut detail = String::from("every overflow happens with an empty buffer");
    for &(t, o) in &s.overflows {
        if o <= 0.0 {
            continue;
        }
        let sent = s.departed(t);
        let arrived = sc.data_curve().eval(t, Side::Left);
        if sent < arrived - tol {
            ok = false;
            detail = format!(
                "overflow of {o:.9} J at t = {t} with {:.9} bits still buffered",
                arrived - sent
            );
            break;
        }
    }
    ctx.push("overflow-buffer-idle", Tier::Optimality, ok, detail);
}

/// Checks that rates change only at events and that each change matches the
/// structure of the optimum: a drained buffer or battery lets the rate rise,
/// a binding floor makes it fall, an overflow without fresh data zeroes it.
fn check_rate_changes(ctx: &mut Ctx) {
    let (sc, s) = (ctx.sc, ctx.s);
    let tol_b = ctx.tol_bits();
    let tol_e = ctx.tol_energy();
    let rate_tol = TOL * s.epochs.iter().map(|e| e.rate).fold(1.0, f64::max);
    let mut ok = true;
    let mut detail = String::from("every rate change classified");

    for w in s.epochs.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if (a.rate - b.rate).abs() <= rate_tol {
            continue;
        }
        let t = a.end();
        let is_event = sc
            .data_packets()
            .iter()
            .map(|&(x, _)| x)
            .chain(sc.energy_packets().iter().map(|&(x, _)| x))
            .chain(sc.qos_curve().jumps().iter().map(|&(x, _)| x))
            .any(|x| times_equal(x, t));
        if !is_event {
            ok = false;
            detail = format!("rate changes at t = {t}, which is not an event");
            break;
        }

        let sent = s.departed(t);
        let spent = s.spent(&sc.model, t);
        let arrived_before = sc.data_curve().eval(t, Side::Left);
        let harvested_before: f64 = sc
            .energy_packets()
            .iter()
            .filter(|&&(e, _)| e < t && !times_equal(e, t))
            .map(|(_, amt)| amt)
            .sum();
        let spilled_before: f64 = s
            .overflows
            .iter()
            .filter(|&&(ot, _)| ot < t && !times_equal(ot, t))
            .map(|(_, o)| o)
            .sum();
        let battery_before = harvested_before - spilled_before - spent;

        let arrives_here: f64 = sc
            .energy_packets()
            .iter()
            .filter(|&&(e, _)| times_equal(e, t))
            .map(|(_, amt)| amt)
            .sum();
        let overflow_here = ctx.recorded_overflow_at(t);
        let battery_after = battery_before + arrives_here - overflow_here;

        let data_here = sc.data_packets().iter().any(|&(d, _)| times_equal(d, t));
        let buffer_empty = sent >= arrived_before - tol_b;
        let battery_empty = battery_before.abs() <= tol_e;
        let battery_full = (battery_after - sc.c_max).abs() <= tol_e;
        let floor = sc.qos_curve().eval(t, Side::Right);
        let floor_jumps = sc.qos_curve().jump_at(t) > 0.0;
        let qos_taut = floor_jumps && (sent - floor).abs() <= tol_b;

        let upper_touch = buffer_empty || battery_empty;
        let lower_touch = qos_taut || battery_full;

        let verdict = if overflow_here > tol_e && !data_here {
            if b.rate.abs() <= rate_tol {
                None
            } else {
                Some(format!(
                    "overflow at t = {t} without fresh data, next rate {} is not zero",
                    b.rate
                ))
            }
        } else if overflow_here > tol_e {
            None // overflow with simultaneous data: either direction is allowed
        } else if upper_touch && lower_touch {
            None // dual touch: either direction
        } else if upper_touch {
            if b.rate > a.rate {
                None
            } else {
                Some(format!(
                    "upper-bound touch at t = {t} but rate falls {} → {}",
                    a.rate, b.rate
                ))
            }
        } else if lower_touch {
            if b.rate < a.rate {
                None
            } else {
                Some(format!(
                    "lower-bound touch at t = {t} but rate rises {} → {}",
                    a.rate, b.rate
                ))
            }
        } else {
            Some(format!(
                "rate changes at t = {t} without touching any bound"
            ))
        };
        if let Some(msg) = verdict {
            ok = false;
            detail = msg;
            break;
        }
    }
    ctx.push("rate-change-classification", Tier::Optimality, ok, detail);
}
