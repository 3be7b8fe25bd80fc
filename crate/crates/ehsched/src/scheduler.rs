//! The iterative optimal solver: per-iteration feasibility check, the
//! finish-at-constant-rate test, epoch selection in the minimum-time and
//! minimum-energy modes, the origin shift between iterations, and assembly
//! of the piecewise-linear departure schedule.

use crate::curves::{amount_tol, times_equal, EnergyTimeline, Side};
use crate::mapping::{
    self, battery_mapping, line_feasible, merge_bounds, min_energy_mapping, BoundPair, Event,
    Probe, RateBounds,
};
use crate::power_rate::PowerError;
use crate::scenario::Scenario;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error("solver exceeded {0} iterations without finishing")]
    NonTermination(usize),
}

/// One constant-rate segment of the departure curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    /// Absolute start instant.
    pub start: f64,
    /// Transmission rate in bits/s.
    pub rate: f64,
    /// Duration in seconds.
    pub len: f64,
    /// Battery overflow recorded exactly at the epoch end, in Joules.
    pub overflow_at_end: f64,
}

impl Epoch {
    pub fn end(&self) -> f64 {
        self.start + self.len
    }
}

/// The solver's output: epochs in absolute time, the completion instant, the
/// per-arrival overflows, and the energy spent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub epochs: Vec<Epoch>,
    pub completion_time: f64,
    pub overflows: Vec<(f64, f64)>,
    pub energy_spent: f64,
}

impl Schedule {
    /// Cumulative bits departed by `t`.
    pub fn departed(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for ep in &self.epochs {
            if t <= ep.start {
                break;
            }
            let span = (t - ep.start).min(ep.len);
            acc += ep.rate * span;
        }
        acc
    }

    /// Cumulative Joules spent by `t` under power model `g`.
    pub fn spent(&self, model: &crate::power_rate::PowerRateModel, t: f64) -> f64 {
        let mut acc = 0.0;
        for ep in &self.epochs {
            if t <= ep.start {
                break;
            }
            let span = (t - ep.start).min(ep.len);
            acc += model.power(ep.rate) * span;
        }
        acc
    }

    pub fn total_bits(&self) -> f64 {
        self.epochs.iter().map(|e| e.rate * e.len).sum()
    }
}

/// Certificate of infeasibility: at quality event `q` (absolute; `+inf` for
/// the completion horizon itself), `required` bits remain due but at most
/// `achievable` bits can still be moved by then. `elapsed`, `sent_before`,
/// and `spent_before` pin the solver state at detection so the claim can be
/// re-derived from the scenario alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibleWitness {
    pub q: f64,
    pub required: f64,
    pub achievable: f64,
    pub elapsed: f64,
    pub sent_before: f64,
    pub spent_before: f64,
    pub overflows: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum SolveOutcome {
    Feasible(Schedule),
    Infeasible(InfeasibleWitness),
}

impl SolveOutcome {
    pub fn schedule(&self) -> Option<&Schedule> {
        match self {
            SolveOutcome::Feasible(s) => Some(s),
            SolveOutcome::Infeasible(_) => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, SolveOutcome::Feasible(_))
    }
}

/// Solver state at the start of an iteration: the moved origin, totals so
/// far, and the energy timeline with every overflow fixed so far.
struct State {
    tau: f64,
    sent: f64,
    spent: f64,
    timeline: EnergyTimeline,
}

impl State {
    fn new(sc: &Scenario) -> State {
        State {
            tau: 0.0,
            sent: 0.0,
            spent: 0.0,
            timeline: EnergyTimeline::new(sc.energy_packets().to_vec()),
        }
    }

    /// Battery level just after the current origin.
    fn battery_now(&self) -> f64 {
        self.timeline.accumulated_battery(self.tau, self.tau) - self.spent
    }

    /// Rescaled best-case battery at `t^-` (origin-relative).
    fn battery_before(&self, t: f64) -> f64 {
        self.timeline
            .accumulated_battery_before(self.tau, self.tau + t)
            - self.spent
    }

    /// Rescaled best-case battery at `t^+` (origin-relative).
    fn battery_after(&self, t: f64) -> f64 {
        self.timeline.accumulated_battery(self.tau, self.tau + t) - self.spent
    }

    /// All energy that can still ever be used.
    fn battery_horizon(&self) -> f64 {
        self.timeline.accumulated_battery(self.tau, f64::INFINITY) - self.spent
    }
}

enum FinishCheck {
    Finished { rate: f64, len: f64 },
    Mode(Mode),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    MinTime,
    MinEnergy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ending {
    Upper,
    Lower,
    Dual,
    /// Floor jumped strictly above the cap at the ending event.
    Pinch,
}

struct EpochPlan {
    rate: f64,
    len: f64,
    idx: usize,
    ending: Ending,
}

/// Computes the minimum-completion-time schedule for `sc`, or an
/// infeasibility witness. Deterministic: identical scenarios produce
/// identical outcomes.
pub fn solve(sc: &Scenario) -> Result<SolveOutcome, SolveError> {
    let total = sc.total_data();
    let mut st = State::new(sc);
    let mut epochs: Vec<Epoch> = Vec::new();
    let n_events =
        sc.energy_packets().len() + sc.data_packets().len() + sc.qos_curve().jumps().len();
    let max_iter = 4 * n_events + 16;

    for _ in 0..max_iter {
        if total - st.sent <= amount_tol(total) {
            return Ok(SolveOutcome::Feasible(assemble(st, epochs)));
        }
        if let Some(w) = feasibility_check(sc, &st) {
            return Ok(SolveOutcome::Infeasible(w));
        }
        let bounds = build_bounds(sc, &st);
        let rb = mapping::rate_bounds(&bounds);
        let check = match &rb {
            Ok(rb) => try_finish(sc, &st, &bounds, rb)?,
            Err(_) => FinishCheck::Mode(Mode::MinEnergy),
        };
        match check {
            FinishCheck::Finished { rate, len } => {
                advance(sc, &mut st, &mut epochs, rate, len)?;
                return Ok(SolveOutcome::Feasible(assemble(st, epochs)));
            }
            FinishCheck::Mode(mode) => {
                let plan = plan_epoch(&bounds, rb.ok(), mode)?;
                if plan.ending == Ending::Pinch {
                    let idx = plan.idx;
                    let cap = bounds.cap_before(idx);
                    let qos_part = bounds.qos_floor_after(idx);
                    if qos_part > cap + amount_tol(cap.max(qos_part)) {
                        // The quality floor itself is unreachable: infeasible.
                        let q_rel = bounds.events[idx].t;
                        return Ok(SolveOutcome::Infeasible(witness(
                            &st,
                            st.tau + q_rel,
                            qos_part,
                            cap,
                        )));
                    }
                }
                let data_at_end = bounds.events[plan.idx].data;
                let ending = plan.ending;
                advance(sc, &mut st, &mut epochs, plan.rate, plan.len)?;
                if ending == Ending::Pinch && !data_at_end {
                    // Unavoidable overflow with an empty buffer: the rate is
                    // pinned to zero until data shows up again.
                    if let Some(w) = zero_rate_wait(sc, &mut st, &mut epochs)? {
                        return Ok(SolveOutcome::Infeasible(w));
                    }
                }
            }
        }
    }
    Err(SolveError::NonTermination(max_iter))
}

fn witness(st: &State, q: f64, required: f64, achievable: f64) -> InfeasibleWitness {
    InfeasibleWitness {
        q,
        required,
        achievable,
        elapsed: st.tau,
        sent_before: st.sent,
        spent_before: st.spent,
        overflows: st.timeline.overflows().to_vec(),
    }
}

/// Per-iteration existence test: at every remaining quality event the floor
/// must not exceed the bits a battery-emptying constant-rate line could move
/// by then; and enough energy must remain to ever finish at all.
fn feasibility_check(sc: &Scenario, st: &State) -> Option<InfeasibleWitness> {
    let d_qos = sc.qos_curve().shift_rescale(st.tau, st.sent);
    let due_now = d_qos.eval(0.0, Side::Right);
    if due_now > amount_tol(sc.total_data()) {
        // A floor due at (or before) the origin is still outstanding;
        // nothing can be transmitted in zero time.
        return Some(witness(st, st.tau, due_now, 0.0));
    }
    for &(q, _) in d_qos.jumps() {
        if q <= 0.0 || times_equal(q, 0.0) {
            continue;
        }
        let required = d_qos.eval(q, Side::Right);
        if required <= amount_tol(sc.total_data()) {
            continue;
        }
        let achievable = sc.model.max_bits(st.battery_before(q).max(0.0), q);
        if required > achievable + amount_tol(achievable.max(required)) {
            return Some(witness(st, st.tau + q, required, achievable));
        }
    }
    // Completion horizon: the floor `D(T) = total` behaves like a quality
    // event at t = ∞; with a Shannon-type model each bit costs at least
    // g'(0+) Joules no matter how slowly it is sent.
    let d_rem = sc.total_data() - st.sent;
    let mepb = sc.model.min_energy_per_bit();
    if d_rem > amount_tol(sc.total_data()) && mepb > 0.0 {
        let e_all = st.battery_horizon();
        if e_all <= d_rem * mepb * (1.0 + 1e-9) {
            return Some(witness(st, f64::INFINITY, d_rem, e_all / mepb));
        }
    }
    None
}

/// Assembles the merged event timeline and data-domain corridor for the
/// current iteration (everything origin-relative).
fn build_bounds(sc: &Scenario, st: &State) -> BoundPair {
    let d_a = sc.data_curve().shift_rescale(st.tau, st.sent);
    let d_qos = sc.qos_curve().shift_rescale(st.tau, st.sent);

    let mut events: Vec<Event> = Vec::new();
    let mut push = |t: f64, data: bool, energy: bool, qos: bool| {
        if t <= 0.0 || times_equal(t, 0.0) {
            return;
        }
        match events.iter_mut().find(|ev| times_equal(ev.t, t)) {
            Some(ev) => {
                ev.data |= data;
                ev.energy |= energy;
                ev.qos |= qos;
            }
            None => events.push(Event {
                t,
                data,
                energy,
                qos,
            }),
        }
    };
    for &(t, _) in d_a.jumps() {
        push(t, true, false, false);
    }
    for &(t, _) in d_qos.jumps() {
        push(t, false, false, true);
    }
    for &(e, _) in st.timeline.arrivals() {
        let rel = e - st.tau;
        if rel > 0.0 && !times_equal(e, st.tau) {
            push(rel, false, true, false);
        }
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));

    let event_times: Vec<f64> = events.iter().map(|e| e.t).collect();
    let last_t = event_times.last().copied().unwrap_or(0.0);
    let d_battery = battery_mapping(
        &sc.model,
        &event_times,
        |t| st.battery_before(t),
        st.battery_after(last_t),
    );
    let energy_events: Vec<f64> = events.iter().filter(|e| e.energy).map(|e| e.t).collect();
    let d_emin = min_energy_mapping(&sc.model, &energy_events, |t| {
        (st.battery_after(t) - sc.c_max).max(0.0)
    });

    let total_data = d_a.total();
    let tail_energy = st.battery_horizon();
    merge_bounds(
        &d_a,
        &d_battery,
        &d_qos,
        &d_emin,
        events,
        total_data,
        tail_energy,
    )
}

/// Checks whether the transmission can end in a single constant-rate epoch
/// that drains a prefix of the remaining energy pools; otherwise picks the
/// epoch-selection mode.
fn try_finish(
    sc: &Scenario,
    st: &State,
    bounds: &BoundPair,
    rb: &RateBounds,
) -> Result<FinishCheck, SolveError> {
    let d_tot = bounds.total_data;
    if rb.r_max.is_finite()
        && mapping::data_deliverable(rb.r_max, bounds) < d_tot - amount_tol(d_tot)
    {
        return Ok(FinishCheck::Mode(Mode::MinEnergy));
    }

    // Energy pools: the battery at the origin, then each future arrival.
    let mut pool_times: Vec<f64> = vec![0.0];
    let mut pool_amounts: Vec<f64> = vec![st.battery_now()];
    for &(e, amt) in st.timeline.arrivals() {
        let rel = e - st.tau;
        if rel > 0.0 && !times_equal(e, st.tau) {
            pool_times.push(rel);
            pool_amounts.push(amt);
        }
    }

    let mut pooled = 0.0;
    for i in 0..pool_times.len() {
        pooled += pool_amounts[i];
        if pooled <= amount_tol(pooled) {
            continue;
        }
        let (t_hat, r_hat) = match sc.model.even_allocation(d_tot, pooled) {
            Ok(pair) => pair,
            Err(PowerError::NoSolution { .. }) => continue,
            Err(e @ PowerError::NoConvergence { .. }) => {
                return Err(SolveError::Internal(e.to_string()))
            }
        };
        // A pooled arrival at or past the finish instant means this pool's
        // even rate counts energy that would not have arrived in time: the
        // pool is fictional, and nothing about the corridor can be concluded
        // from its rate. Later pools only finish faster, so the loop runs
        // out and the epoch comes from the corridor instead.
        let pool_overshoot = pool_times[1..=i]
            .iter()
            .any(|&t| t > t_hat || times_equal(t, t_hat));
        if pool_overshoot {
            continue;
        }
        if r_hat > rb.r_max + amount_tol(rb.r_max.min(r_hat)) {
            return Ok(FinishCheck::Mode(Mode::MinTime));
        }
        if r_hat < rb.r_min - amount_tol(rb.r_min) {
            continue;
        }
        // An unpooled arrival strictly inside the window means a bigger pool
        // must be considered first.
        let unpooled_inside = pool_times[i + 1..]
            .iter()
            .any(|&t| t < t_hat && !times_equal(t, t_hat));
        if unpooled_inside {
            continue;
        }
        // Guard beyond the plain corridor test: the even line must actually
        // fit the corridor up to its finish instant.
        if !line_feasible(r_hat, bounds, t_hat) {
            if upper_violation(r_hat, bounds, t_hat) {
                return Ok(FinishCheck::Mode(if rb.r_max.is_finite() {
                    Mode::MinTime
                } else {
                    Mode::MinEnergy
                }));
            }
            continue;
        }
        return Ok(FinishCheck::Finished {
            rate: r_hat,
            len: t_hat,
        });
    }
    // No pool finishes with an exact spend. The mode now hinges on whether
    // any constant-rate finish exists at all (leftover energy allowed): if
    // so, the node already holds enough energy and races the cap; if not,
    // it saves energy along the corridor.
    let mode = if finish_possible(sc, st, bounds) && rb.r_max.is_finite() {
        Mode::MinTime
    } else {
        Mode::MinEnergy
    };
    Ok(FinishCheck::Mode(mode))
}

/// True when some constant rate carries all remaining data to completion
/// (leftover energy allowed). Tested per finish window — completion before
/// the next event — at the window's slowest admissible rate: floors already
/// passed push the rate up, while floors and caps beyond the finish instant
/// do not bind at all (in particular, overflow-avoidance floors vanish once
/// the transmission is over).
fn finish_possible(sc: &Scenario, st: &State, bounds: &BoundPair) -> bool {
    let d_tot = bounds.total_data;
    let mut floor_req: f64 = 0.0;
    for k in 0..=bounds.len() {
        let edge = if k < bounds.len() {
            d_tot / bounds.events[k].t * (1.0 + 1e-9)
        } else {
            0.0
        };
        let r = floor_req.max(edge);
        if r <= 0.0 {
            // No floor demands speed: an arbitrarily slow finish works
            // (the per-iteration energy-horizon check already passed).
            return true;
        }
        let t_fin = d_tot / r;
        let spend = sc.model.power(r) * t_fin;
        let available = st.battery_after(t_fin);
        if line_feasible(r, bounds, t_fin) && spend <= available + amount_tol(available) {
            return true;
        }
        if k < bounds.len() && bounds.has_lower_jump(k) {
            floor_req = floor_req.max(bounds.floor_after(k) / bounds.events[k].t);
        }
    }
    false
}

/// True when the line `r·t` strictly exceeds the cap at some event in
/// `(0, t_end)` (as opposed to dipping below a floor).
fn upper_violation(r: f64, bounds: &BoundPair, t_end: f64) -> bool {
    for (i, ev) in bounds.events.iter().enumerate() {
        if ev.t >= t_end * (1.0 - 1e-12) {
            break;
        }
        let v = r * ev.t;
        let cap = bounds.cap_before(i);
        if cap.is_finite() && v > cap + amount_tol(cap.max(v)) {
            return true;
        }
    }
    false
}

/// Rate and length of the next epoch for the given mode.
fn plan_epoch(
    bounds: &BoundPair,
    rb: Option<RateBounds>,
    mode: Mode,
) -> Result<EpochPlan, SolveError> {
    if bounds.is_empty() {
        return Err(SolveError::Internal(
            "epoch requested on an empty corridor".into(),
        ));
    }
    match mode {
        Mode::MinTime => {
            let rb =
                rb.ok_or_else(|| SolveError::Internal("min-time mode without rate bounds".into()))?;
            if !rb.r_max.is_finite() || !rb.z_max.is_finite() {
                return Err(SolveError::Internal(
                    "min-time mode with an unbounded corner rate".into(),
                ));
            }
            let idx = event_index(bounds, rb.z_max)?;
            Ok(EpochPlan {
                rate: rb.r_max,
                len: rb.z_max,
                idx,
                ending: analyze_ending(bounds, idx, rb.r_max)?,
            })
        }
        Mode::MinEnergy => {
            let rate = min_energy_rate(bounds, rb)?;
            match mapping::probe(rate, bounds) {
                Probe::UpperTouch { idx, .. } => Ok(EpochPlan {
                    rate,
                    len: bounds.events[idx].t,
                    idx,
                    ending: Ending::Upper,
                }),
                Probe::LowerTouch { idx } => Ok(EpochPlan {
                    rate,
                    len: bounds.events[idx].t,
                    idx,
                    ending: Ending::Lower,
                }),
                Probe::DualTouch { idx } => Ok(EpochPlan {
                    rate,
                    len: bounds.events[idx].t,
                    idx,
                    ending: Ending::Dual,
                }),
                Probe::Pinch { idx } => Ok(EpochPlan {
                    rate,
                    len: bounds.events[idx].t,
                    idx,
                    ending: Ending::Pinch,
                }),
                other => Err(SolveError::Internal(format!(
                    "corridor-splitting rate {rate} has no valid ending: {other:?}"
                ))),
            }
        }
    }
}

/// The corridor-splitting rate: the boundary between lines whose first
/// bound-crossing is the floor and lines whose first crossing is the cap.
/// The boundary is always a corner rate, so it is found by enumerating the
/// corner and pinch rates and probing the open gaps between them.
fn min_energy_rate(bounds: &BoundPair, rb: Option<RateBounds>) -> Result<f64, SolveError> {
    let mut cands: Vec<f64> = vec![0.0];
    let mut floor_binds = false;
    for (i, ev) in bounds.events.iter().enumerate() {
        let cap = bounds.cap_before(i);
        let floor = bounds.floor_after(i);
        if bounds.has_lower_jump(i) {
            cands.push(floor / ev.t);
            floor_binds = true;
        }
        if bounds.has_upper_jump(i) && cap.is_finite() {
            cands.push(cap / ev.t);
        }
        if cap.is_finite() && floor > cap + amount_tol(cap.max(floor)) {
            // Pinched event: the best any line can do is ride the cap into it.
            cands.push(cap / ev.t);
            floor_binds = true;
        }
    }
    if !floor_binds {
        // No floor ever binds: the epoch rides the tightest cap to its
        // corner (nothing pushes the rate from below).
        let r_max = rb.map(|rb| rb.r_max).unwrap_or(f64::INFINITY);
        if r_max.is_finite() {
            return Ok(r_max);
        }
        return Err(SolveError::Internal(
            "energy-saving epoch requested on an unconstrained corridor".into(),
        ));
    }
    cands.sort_by(f64::total_cmp);
    cands.dedup_by(|a, b| (*a - *b).abs() <= amount_tol(*b));

    // A line below the splitting rate meets the floor first; above it, the
    // cap. Probing the middle of each inter-candidate gap locates the flip.
    let crosses_floor_first = |r: f64| -> bool {
        matches!(
            mapping::probe(r, bounds),
            Probe::LowerStrict { .. } | Probe::LowerTouch { .. }
        )
    };
    for (k, &cand) in cands.iter().enumerate() {
        let above = match cands.get(k + 1) {
            Some(&next) => 0.5 * (cand + next),
            None => cand * 1.5 + 1.0,
        };
        if !crosses_floor_first(above) {
            return Ok(cand);
        }
    }
    Err(SolveError::Internal(
        "no line ever meets the upper bound; the corridor is unbounded".into(),
    ))
}

fn event_index(bounds: &BoundPair, t: f64) -> Result<usize, SolveError> {
    bounds
        .events
        .iter()
        .position(|ev| times_equal(ev.t, t))
        .ok_or_else(|| SolveError::Internal(format!("no event at t = {t}")))
}

fn analyze_ending(bounds: &BoundPair, idx: usize, rate: f64) -> Result<Ending, SolveError> {
    let t = bounds.events[idx].t;
    let v = rate * t;
    let cap = bounds.cap_before(idx);
    let floor = bounds.floor_after(idx);
    let upper = cap.is_finite() && (v - cap).abs() <= amount_tol(cap.max(v));
    let lower = (v - floor).abs() <= amount_tol(floor.max(v));
    if upper && floor > cap + amount_tol(cap.max(floor)) {
        return Ok(Ending::Pinch);
    }
    match (upper, lower) {
        (true, true) => Ok(Ending::Dual),
        (true, false) => Ok(Ending::Upper),
        (false, true) => Ok(Ending::Lower),
        (false, false) => Err(SolveError::Internal(format!(
            "epoch ends at t = {t} without touching either bound"
        ))),
    }
}

/// Executes one epoch: walks the battery across every arrival inside it,
/// fixing overflows as they become unavoidable, and moves the origin.
fn advance(
    sc: &Scenario,
    st: &mut State,
    epochs: &mut Vec<Epoch>,
    rate: f64,
    len: f64,
) -> Result<(), SolveError> {
    if !(len > 0.0) {
        return Err(SolveError::Internal(format!(
            "non-positive epoch length {len}"
        )));
    }
    let power = sc.model.power(rate);
    let start = st.tau;
    let end = st.tau + len;
    let e_scale = sc.total_energy().max(sc.c_max);
    let tol = 1e-6 * e_scale.max(1.0);

    let mut b = st.battery_now();
    let mut cursor = start;
    let mut overflow_at_end = 0.0;
    let arrivals: Vec<(f64, f64)> = st
        .timeline
        .arrivals()
        .iter()
        .copied()
        .filter(|&(e, _)| e > start && !times_equal(e, start) && (e < end || times_equal(e, end)))
        .collect();
    for (e, amt) in arrivals {
        b -= power * (e - cursor);
        cursor = e;
        if b < -tol {
            return Err(SolveError::Internal(format!(
                "battery driven to {b} J at t = {e}"
            )));
        }
        b = b.max(0.0);
        let spill = (b + amt - sc.c_max).max(0.0);
        if spill > amount_tol(sc.c_max) {
            st.timeline.record_overflow(e, spill);
            if times_equal(e, end) {
                overflow_at_end += spill;
            }
        }
        b = (b + amt - spill).min(sc.c_max);
    }
    b -= power * (end - cursor);
    if b < -tol || b > sc.c_max + tol {
        return Err(SolveError::Internal(format!(
            "battery {b} J outside [0, {}] at epoch end t = {end}",
            sc.c_max
        )));
    }

    st.tau = end;
    st.sent += rate * len;
    st.spent += power * len;
    epochs.push(Epoch {
        start,
        rate,
        len,
        overflow_at_end,
    });
    Ok(())
}

/// After an overflow with an empty buffer the rate stays zero until the next
/// data arrival; quality floors falling due during the wait are unmeetable.
fn zero_rate_wait(
    sc: &Scenario,
    st: &mut State,
    epochs: &mut Vec<Epoch>,
) -> Result<Option<InfeasibleWitness>, SolveError> {
    let next_data = sc
        .data_packets()
        .iter()
        .map(|&(d, _)| d)
        .find(|&d| d > st.tau && !times_equal(d, st.tau));
    let Some(next_data) = next_data else {
        return Ok(None); // nothing left to wait for; the main loop settles it
    };
    for &(q, _) in sc.qos_curve().jumps() {
        let inside =
            q > st.tau && !times_equal(q, st.tau) && (q < next_data || times_equal(q, next_data));
        if !inside {
            continue;
        }
        let required = sc.qos_curve().eval(q, Side::Right) - st.sent;
        if required > amount_tol(sc.total_data()) {
            return Ok(Some(witness(st, q, required, 0.0)));
        }
    }
    advance(sc, st, epochs, 0.0, next_data - st.tau)?;
    Ok(None)
}

/// Final schedule assembly: adjacent epochs with equal rates and no overflow
/// at the junction merge into one linear piece.
fn assemble(st: State, epochs: Vec<Epoch>) -> Schedule {
    let mut merged: Vec<Epoch> = Vec::with_capacity(epochs.len());
    for ep in epochs {
        match merged.last_mut() {
            Some(last)
                if (last.rate - ep.rate).abs() <= amount_tol(last.rate.max(ep.rate))
                    && last.overflow_at_end == 0.0 =>
            {
                last.len += ep.len;
                last.overflow_at_end = ep.overflow_at_end;
            }
            _ => merged.push(ep),
        }
    }
    Schedule {
        epochs: merged,
        completion_time: st.tau,
        overflows: st.timeline.overflows().to_vec(),
        energy_spent: st.spent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power_rate::PowerRateModel;
    use crate::scenario::QosSpec;

    fn shannon(
        c_max: f64,
        energy: Vec<(f64, f64)>,
        data: Vec<(f64, f64)>,
        qos: QosSpec,
    ) -> Scenario {
        Scenario::new(PowerRateModel::shannon_unit(), c_max, energy, data, qos).unwrap()
    }

    fn solved(sc: &Scenario) -> Schedule {
        match solve(sc).unwrap() {
            SolveOutcome::Feasible(s) => s,
            SolveOutcome::Infeasible(w) => panic!("unexpected infeasibility: {w:?}"),
        }
    }

    #[test]
    fn single_even_allocation_epoch() {
        let sc = shannon(1.0, vec![(0.0, 1.0)], vec![(0.0, 1.0)], QosSpec::None);
        let s = solved(&sc);
        assert_eq!(s.epochs.len(), 1);
        assert!((s.epochs[0].rate - 1.0).abs() < 1e-9);
        assert!((s.completion_time - 1.0).abs() < 1e-9);
    }

    #[test]
    fn battery_refill_keeps_constant_rate() {
        // The battery drains to exactly zero when the second packet lands.
        let sc = shannon(
            1.0,
            vec![(0.0, 1.0), (1.0, 1.0)],
            vec![(0.0, 2.0)],
            QosSpec::None,
        );
        let s = solved(&sc);
        assert_eq!(s.epochs.len(), 1, "epochs: {:?}", s.epochs);
        assert!((s.epochs[0].rate - 1.0).abs() < 1e-9);
        assert!((s.completion_time - 2.0).abs() < 1e-9);
        assert!(s.overflows.is_empty());
    }

    #[test]
    fn forced_overflow_walkthrough() {
        // Battery full at t=0.5 with only half a bit in the buffer: the
        // overflow is unavoidable, the rate stays zero until the next packet,
        // and the tail is a plain even allocation.
        let sc = shannon(
            1.0,
            vec![(0.0, 1.0), (0.5, 1.0)],
            vec![(0.0, 0.5), (0.75, 1.0)],
            QosSpec::None,
        );
        let s = solved(&sc);
        assert_eq!(s.epochs.len(), 3, "epochs: {:?}", s.epochs);
        assert!((s.epochs[0].rate - 1.0).abs() < 1e-6);
        assert!((s.epochs[0].len - 0.5).abs() < 1e-9);
        assert!((s.epochs[0].overflow_at_end - 0.5).abs() < 1e-6);
        assert_eq!(s.epochs[1].rate, 0.0);
        assert!((s.epochs[1].len - 0.25).abs() < 1e-9);
        assert!((s.epochs[2].rate - 1.0).abs() < 1e-6);
        assert!((s.epochs[2].len - 1.0).abs() < 1e-6);
        assert!((s.completion_time - 1.75).abs() < 1e-6);
    }

    #[test]
    fn unreachable_quality_floor_detected_immediately() {
        // 2 bits due at t=1 with 1 J: at most 1 bit can ever be out by then.
        let sc = shannon(
            10.0,
            vec![(0.0, 1.0)],
            vec![(0.0, 2.0)],
            QosSpec::Explicit {
                events: vec![(1.0, 2.0)],
            },
        );
        match solve(&sc).unwrap() {
            SolveOutcome::Infeasible(w) => {
                assert!((w.q - 1.0).abs() < 1e-9);
                assert!((w.required - 2.0).abs() < 1e-9);
                assert!((w.achievable - 1.0).abs() < 1e-9);
            }
            SolveOutcome::Feasible(s) => panic!("expected infeasible, got {s:?}"),
        }
    }

    #[test]
    fn boundary_qos_equality_is_feasible() {
        let sc = shannon(
            10.0,
            vec![(0.0, 1.0)],
            vec![(0.0, 1.0)],
            QosSpec::Explicit {
                events: vec![(1.0, 1.0)],
            },
        );
        assert!(solve(&sc).unwrap().is_feasible());
    }

    #[test]
    fn energy_shortfall_without_qos_is_infeasible() {
        // 2 bits with 1 J total: below the ln2-per-bit floor, no horizon works.
        let sc = shannon(1.0, vec![(0.0, 1.0)], vec![(0.0, 2.0)], QosSpec::None);
        match solve(&sc).unwrap() {
            SolveOutcome::Infeasible(w) => {
                assert!(w.q.is_infinite());
                assert!((w.required - 2.0).abs() < 1e-9);
            }
            SolveOutcome::Feasible(s) => panic!("expected infeasible, got {s:?}"),
        }
    }

    #[test]
    fn min_time_mode_rides_the_cap() {
        // Next-packet emptying is too expensive; the optimum rides the
        // battery bound until the refill, then sprints.
        let sc = shannon(
            10.0,
            vec![(0.0, 3.0), (0.25, 0.5)],
            vec![(0.0, 1.0)],
            QosSpec::None,
        );
        let s = solved(&sc);
        assert!(s.completion_time < 0.28, "T = {}", s.completion_time);
        assert_eq!(s.epochs.len(), 2);
        // First epoch drains the initial battery exactly by 0.25.
        let spent = sc.model.power(s.epochs[0].rate) * s.epochs[0].len;
        assert!((spent - 3.0).abs() < 1e-6, "spent {spent}");
        assert!(s.epochs[1].rate > s.epochs[0].rate);
    }

    #[test]
    fn data_drought_waits_at_cap() {
        // Data availability binds early: ride the arrival curve at the
        // corner rate, then sprint once the second packet lands.
        let sc = shannon(
            10.0,
            vec![(0.0, 3.0)],
            vec![(0.0, 1.0), (1.0, 1.0)],
            QosSpec::None,
        );
        let s = solved(&sc);
        assert!(s.epochs.len() >= 2, "epochs: {:?}", s.epochs);
        // First epoch delivers exactly the first packet by t=1.
        assert!((s.epochs[0].rate * s.epochs[0].len - 1.0).abs() < 1e-9);
        assert!((s.epochs[0].len - 1.0).abs() < 1e-9);
        assert!(s.epochs[1].rate > s.epochs[0].rate);
        // All energy is spent by the completion instant.
        assert!((s.energy_spent - 3.0).abs() < 1e-6);
    }

    #[test]
    fn qos_forces_early_sprint() {
        // 1.5 of 2 bits due by t=0.5 forces a rate above the even
        // allocation; the rate decreases once the floor is met.
        let sc = shannon(
            10.0,
            vec![(0.0, 4.0)],
            vec![(0.0, 2.0)],
            QosSpec::Explicit {
                events: vec![(0.5, 1.5)],
            },
        );
        let s = solved(&sc);
        assert!(s.epochs.len() >= 2, "epochs: {:?}", s.epochs);
        assert!((s.departed(0.5) - 1.5) >= -1e-9);
        assert!((s.epochs[0].rate - 3.0).abs() < 1e-6);
        assert!(s.epochs[0].rate > s.epochs[1].rate);
    }

    #[test]
    fn deterministic_output() {
        let sc = shannon(
            1.0,
            vec![(0.0, 0.8), (0.4, 0.7), (0.9, 0.5)],
            vec![(0.0, 0.6), (0.3, 0.9)],
            QosSpec::uniform_deadline(1.2),
        );
        let a = solve(&sc).unwrap();
        let b = solve(&sc).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monomial_model_end_to_end() {
        // g(r) = r²: no per-bit energy floor; the early battery bound bends
        // the schedule before the deadlines bind.
        let sc = Scenario::new(
            PowerRateModel::Monomial {
                exponent: 2.0,
                scale: 1.0,
            },
            1.0,
            vec![(0.0, 0.6), (0.5, 0.9)],
            vec![(0.0, 1.0), (0.3, 0.5)],
            QosSpec::uniform_deadline(1.5),
        )
        .unwrap();
        let s = solved(&sc);
        let report = crate::validate::validate(&sc, &s);
        assert!(report.all_passed(), "{report}");
        assert!((s.energy_spent - 1.5).abs() < 1e-6, "{}", s.energy_spent);
    }

    #[test]
    fn buffer_qos_end_to_end() {
        // A 0.6-bit queue: room for the 0.5-bit packet at t = 0.5 only if
        // 0.5 of the first packet is already out.
        let sc = shannon(
            4.0,
            vec![(0.0, 3.0)],
            vec![(0.0, 0.6), (0.5, 0.5)],
            QosSpec::Buffer { beta: 0.6 },
        );
        let s = solved(&sc);
        let report = crate::validate::validate(&sc, &s);
        assert!(report.all_passed(), "{report}");
        assert!(s.departed(0.5) >= 0.5 - 1e-9, "{}", s.departed(0.5));
    }

    #[test]
    fn dual_touch_boundary() {
        // The battery drains to zero exactly when the refill tops it back to
        // capacity: upper and lower bounds meet in a point, and the rate may
        // fall afterwards (more time than energy left).
        let sc = shannon(
            1.0,
            vec![(0.0, 1.0), (0.9, 1.0)],
            vec![(0.0, 2.0)],
            QosSpec::None,
        );
        let s = solved(&sc);
        assert!(s.overflows.is_empty(), "{s:?}");
        assert_eq!(s.epochs.len(), 2, "{:?}", s.epochs);
        assert!((s.epochs[0].len - 0.9).abs() < 1e-6);
        // Spends the initial Joule exactly by the refill.
        let spent = sc.model.power(s.epochs[0].rate) * s.epochs[0].len;
        assert!((spent - 1.0).abs() < 1e-6, "spent {spent}");
        assert!(s.epochs[1].rate < s.epochs[0].rate);
        assert!(crate::validate::validate(&sc, &s).all_passed());
    }

    #[test]
    fn overflow_with_simultaneous_data_needs_no_idle() {
        // The refill that overflows lands together with fresh data, so no
        // zero-rate stretch follows the spill.
        let sc = shannon(
            1.0,
            vec![(0.0, 1.0), (0.5, 1.0)],
            vec![(0.0, 0.5), (0.5, 1.0)],
            QosSpec::None,
        );
        let s = solved(&sc);
        assert!((s.completion_time - 1.5).abs() < 1e-6, "{s:?}");
        assert_eq!(s.epochs.len(), 2, "{:?}", s.epochs);
        assert!((s.epochs[0].overflow_at_end - 0.5).abs() < 1e-6);
        assert!(s.epochs.iter().all(|e| e.rate > 0.0));
        assert!(crate::validate::validate(&sc, &s).all_passed());
    }

    #[test]
    fn triple_event_instant() {
        // Data, energy, and a quality floor landing at the same instant.
        let sc = shannon(
            1.0,
            vec![(0.0, 1.0), (0.5, 0.5)],
            vec![(0.0, 1.0), (0.5, 0.5)],
            QosSpec::Explicit {
                events: vec![(0.5, 0.75)],
            },
        );
        let s = solved(&sc);
        assert!(s.departed(0.5) >= 0.75 - 1e-9);
        assert!(crate::validate::validate(&sc, &s).all_passed());
    }

    #[test]
    fn packet_larger_than_buffer_is_infeasible() {
        // A 0.8-bit packet landing in a 0.6-bit queue would need 0.2 bits
        // transmitted instantaneously; the witness pins the data bound.
        let sc = shannon(
            4.0,
            vec![(0.0, 3.0)],
            vec![(0.0, 0.6), (0.5, 0.8)],
            QosSpec::Buffer { beta: 0.6 },
        );
        match solve(&sc).unwrap() {
            SolveOutcome::Infeasible(w) => {
                assert!((w.q - 0.5).abs() < 1e-9);
                assert!((w.required - 0.8).abs() < 1e-9);
                assert!((w.achievable - 0.6).abs() < 1e-9); // all data arrived before q
            }
            SolveOutcome::Feasible(s) => panic!("expected infeasible, got {s:?}"),
        }
    }

    #[test]
    fn departed_curve_matches_epochs() {
        let sc = shannon(
            1.0,
            vec![(0.0, 1.0), (1.0, 1.0)],
            vec![(0.0, 2.0)],
            QosSpec::None,
        );
        let s = solved(&sc);
        assert!((s.departed(s.completion_time) - 2.0).abs() < 1e-9);
        assert!((s.departed(0.5) - 0.5).abs() < 1e-9);
        assert_eq!(s.departed(0.0), 0.0);
    }
}
