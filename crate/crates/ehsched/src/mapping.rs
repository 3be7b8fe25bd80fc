//! Per-iteration mapping of energy-domain constraints into the data domain,
//! the merged upper/lower corridor, and the corner-rate machinery that
//! brackets the optimal epoch rate.
//!
//! Conventions: the upper bound holds, between events, the value it takes at
//! the *next* event (so a constant-rate line only needs checking at event
//! instants); the lower bound holds the value of its *previous* event.

use crate::curves::{amount_tol, Side, Staircase};
use crate::power_rate::PowerRateModel;
use thiserror::Error;

/// One instant on the merged timeline, tagged with every kind of event that
/// lands there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub data: bool,
    pub energy: bool,
    pub qos: bool,
}

#[derive(Debug, Error, PartialEq)]
#[error("no feasible straight line reaches any upper-bound corner")]
pub struct NoFeasibleUpper;

/// Merged data-domain corridor for one solver iteration: the most restrictive
/// upper bound, the most restrictive lower bound, and the tagged event
/// timeline they were sampled on.
#[derive(Debug, Clone)]
pub struct BoundPair {
    pub upper: Staircase,
    pub lower: Staircase,
    pub events: Vec<Event>,
    cap_left: Vec<f64>,
    cap_right: Vec<f64>,
    floor_left: Vec<f64>,
    floor_right: Vec<f64>,
    qos_floor: Vec<f64>,
    emin_floor: Vec<f64>,
    /// Remaining data, counting arrivals past the last event.
    pub total_data: f64,
    /// Battery available from the last event onward (no further arrivals).
    pub tail_energy: f64,
}

/// Feasible-corner rate interval of the current iteration. `r_max`/`z_max`
/// are `+inf` when no upper corner constrains the line; `r_min` is 0 with
/// `z_min = +inf` when the lower bound is identically zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBounds {
    pub r_max: f64,
    pub z_max: f64,
    pub r_min: f64,
    pub z_min: f64,
}

/// First place a constant-rate line meets or violates a corridor bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Probe {
    /// Strictly crossed the cap inside the interval ending at `events[idx]`.
    UpperStrict { idx: usize, t_cross: f64 },
    /// Met the cap exactly at an event; `graze` when the cap jumps strictly
    /// above the line immediately after (the line could legally continue).
    UpperTouch { idx: usize, graze: bool },
    /// Fell strictly below the floor that starts at `events[idx]`.
    LowerStrict { idx: usize },
    /// Met a lower-bound corner exactly.
    LowerTouch { idx: usize },
    /// Met the cap at an event whose floor jumps strictly above the cap.
    Pinch { idx: usize },
    /// Met cap and floor simultaneously at the same event.
    DualTouch { idx: usize },
    /// No bound met at any event.
    Clear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSide {
    Upper,
    Lower,
}

impl BoundPair {
    /// Assembles a corridor directly from per-event one-sided samples.
    /// `caps`/`floors` are `(left, right)` pairs per event; `qos_floor` and
    /// `emin_floor` are the right-side components the floor was merged from.
    #[allow(clippy::too_many_arguments)]
    pub fn from_samples(
        events: Vec<Event>,
        caps: Vec<(f64, f64)>,
        floors: Vec<(f64, f64)>,
        qos_floor: Vec<f64>,
        emin_floor: Vec<f64>,
        total_data: f64,
        tail_energy: f64,
    ) -> Self {
        assert_eq!(events.len(), caps.len());
        assert_eq!(events.len(), floors.len());
        let upper = staircase_from_samples(&events, &caps);
        let lower = staircase_from_samples(&events, &floors);
        BoundPair {
            upper,
            lower,
            cap_left: caps.iter().map(|c| c.0).collect(),
            cap_right: caps.iter().map(|c| c.1).collect(),
            floor_left: floors.iter().map(|f| f.0).collect(),
            floor_right: floors.iter().map(|f| f.1).collect(),
            qos_floor,
            emin_floor,
            events,
            total_data,
            tail_energy,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// `D_max` on the interval ending at event `i`.
    pub fn cap_before(&self, i: usize) -> f64 {
        self.cap_left[i]
    }

    /// `D_max` on the interval starting right after event `i`.
    pub fn cap_after(&self, i: usize) -> f64 {
        self.cap_right[i]
    }

    /// `D_min` on the interval ending at event `i`.
    pub fn floor_before(&self, i: usize) -> f64 {
        self.floor_left[i]
    }

    /// `D_min` from event `i` on.
    pub fn floor_after(&self, i: usize) -> f64 {
        self.floor_right[i]
    }

    pub fn qos_floor_after(&self, i: usize) -> f64 {
        self.qos_floor[i]
    }

    pub fn emin_floor_after(&self, i: usize) -> f64 {
        self.emin_floor[i]
    }

    pub fn has_upper_jump(&self, i: usize) -> bool {
        self.cap_right[i] > self.cap_left[i] + amount_tol(self.cap_left[i])
    }

    /// Cap of the interval `t` falls into (caps hold the value of the event
    /// that closes their interval; past the last event the cap opens up).
    pub fn cap_on_interval_ending_at(&self, t: f64) -> f64 {
        for (i, ev) in self.events.iter().enumerate() {
            if t < ev.t || crate::curves::times_equal(t, ev.t) {
                return self.cap_left[i];
            }
        }
        f64::INFINITY
    }

    pub fn has_lower_jump(&self, i: usize) -> bool {
        self.floor_right[i] > self.floor_left[i] + amount_tol(self.floor_right[i])
    }
}

fn staircase_from_samples(events: &[Event], samples: &[(f64, f64)]) -> Staircase {
    if events.is_empty() {
        return Staircase::flat(0.0);
    }
    let base = samples[0].0;
    let jumps = events
        .iter()
        .zip(samples)
        .filter(|(_, (l, r))| r.is_finite() && r > l)
        .map(|(ev, (l, r))| (ev.t, r - l));
    Staircase::new(if base.is_finite() { base } else { 0.0 }, jumps)
}

/// Effective mapping of the battery bound into the data domain: sampled at
/// event instants (`max_bits` of the battery available strictly before the
/// event), holding the next event's value in between. Past the final event
/// nothing refills the battery but the horizon is open, so the value there
/// is the limit `bits_limit(battery_after_last)` — the bound opens upward.
pub fn battery_mapping(
    model: &PowerRateModel,
    events: &[f64],
    battery_before: impl Fn(f64) -> f64,
    battery_after_last: f64,
) -> Staircase {
    if events.is_empty() {
        return Staircase::flat(f64::INFINITY);
    }
    let values: Vec<f64> = events
        .iter()
        .map(|&t| model.max_bits(battery_before(t).max(0.0), t))
        .collect();
    let after_last = model.bits_limit(battery_after_last.max(0.0));
    let mut jumps = Vec::with_capacity(events.len());
    for i in 0..events.len() {
        let next = if i + 1 < events.len() {
            values[i + 1]
        } else {
            after_last
        };
        let inc = next - values[i];
        if inc > 0.0 {
            jumps.push((events[i], inc));
        }
    }
    Staircase::new(values[0], jumps)
}

/// Effective mapping of the minimum-expenditure floor into the data domain:
/// at each energy event, the bits a constant-rate line must have carried so
/// the energy it burned covers the overflow-avoidance requirement.
pub fn min_energy_mapping(
    model: &PowerRateModel,
    energy_events: &[f64],
    emin_after: impl Fn(f64) -> f64,
) -> Staircase {
    let mut prev = 0.0;
    let mut jumps = Vec::with_capacity(energy_events.len());
    for &t in energy_events {
        let v = model.max_bits(emin_after(t).max(0.0), t);
        if v > prev {
            jumps.push((t, v - prev));
            prev = v;
        }
    }
    Staircase::new(0.0, jumps)
}

/// Pointwise merge of the four data-domain bounds over the tagged event
/// timeline: `D_max = min(data arrivals, battery mapping)`,
/// `D_min = max(quality floor, overflow floor)`.
pub fn merge_bounds(
    d_a: &Staircase,
    d_battery: &Staircase,
    d_qos: &Staircase,
    d_emin: &Staircase,
    events: Vec<Event>,
    total_data: f64,
    tail_energy: f64,
) -> BoundPair {
    let mut caps = Vec::with_capacity(events.len());
    let mut floors = Vec::with_capacity(events.len());
    let mut qos_floor = Vec::with_capacity(events.len());
    let mut emin_floor = Vec::with_capacity(events.len());
    for ev in &events {
        let cap_l = d_a
            .eval(ev.t, Side::Left)
            .min(d_battery.eval(ev.t, Side::Left));
        let cap_r = d_a
            .eval(ev.t, Side::Right)
            .min(d_battery.eval(ev.t, Side::Right));
        let q_r = d_qos.eval(ev.t, Side::Right);
        let m_r = d_emin.eval(ev.t, Side::Right);
        let floor_l = d_qos
            .eval(ev.t, Side::Left)
            .max(d_emin.eval(ev.t, Side::Left));
        caps.push((cap_l, cap_r.max(cap_l)));
        floors.push((floor_l, q_r.max(m_r).max(floor_l)));
        qos_floor.push(q_r);
        emin_floor.push(m_r);
    }
    BoundPair::from_samples(
        events,
        caps,
        floors,
        qos_floor,
        emin_floor,
        total_data,
        tail_energy,
    )
}

/// True when the line `r·t` stays inside the corridor on `(0, t_end)`: at or
/// under the cap that ends at each event, at or above the floor that starts
/// there, and — since the cap is constant between events — not above the cap
/// of the interval `t_end` itself falls in.
pub fn line_feasible(r: f64, bounds: &BoundPair, t_end: f64) -> bool {
    debug_assert!(r >= 0.0);
    for (i, ev) in bounds.events.iter().enumerate() {
        if ev.t >= t_end * (1.0 - 1e-12) {
            break;
        }
        let v = r * ev.t;
        let cap = bounds.cap_before(i);
        if v > cap + amount_tol(cap.max(v)) {
            return false;
        }
        let floor = bounds.floor_after(i);
        if v < floor - amount_tol(floor.max(v)) {
            return false;
        }
    }
    let end_cap = bounds.cap_on_interval_ending_at(t_end);
    let v_end = r * t_end;
    if end_cap.is_finite() && v_end > end_cap + amount_tol(end_cap.max(v_end)) {
        return false;
    }
    true
}

/// Classifies the first place the line `r·t` meets or violates a bound,
/// scanning the event timeline in order.
pub fn probe(r: f64, bounds: &BoundPair) -> Probe {
    debug_assert!(r >= 0.0);
    for (i, ev) in bounds.events.iter().enumerate() {
        let v = r * ev.t;
        let cap = bounds.cap_before(i);
        let tol_cap = amount_tol(if cap.is_finite() { cap.max(v) } else { v });
        if cap.is_finite() && v > cap + tol_cap {
            let t_cross = if r > 0.0 { cap / r } else { ev.t };
            return Probe::UpperStrict { idx: i, t_cross };
        }
        let upper_touch = cap.is_finite() && (v - cap).abs() <= tol_cap;
        let floor = bounds.floor_after(i);
        let tol_floor = amount_tol(floor.max(v));
        let lower_violate = v < floor - tol_floor;
        let lower_touch = bounds.has_lower_jump(i) && (v - floor).abs() <= tol_floor;
        if upper_touch && lower_violate {
            return Probe::Pinch { idx: i };
        }
        if upper_touch && lower_touch {
            return Probe::DualTouch { idx: i };
        }
        if upper_touch {
            let graze = bounds.cap_after(i) > v + tol_cap;
            return Probe::UpperTouch { idx: i, graze };
        }
        if lower_violate {
            return Probe::LowerStrict { idx: i };
        }
        if lower_touch {
            return Probe::LowerTouch { idx: i };
        }
    }
    Probe::Clear
}

/// Earliest instant where the line meets or violates a bound (touch counts),
/// with the side and the data carried up to there. `None` when the line runs
/// clear of every event. Simultaneous upper/lower meets report the upper side.
pub fn first_crossing(r: f64, bounds: &BoundPair) -> Option<(f64, BoundSide, f64)> {
    match probe(r, bounds) {
        Probe::UpperStrict { idx, t_cross } => {
            Some((t_cross, BoundSide::Upper, bounds.cap_before(idx)))
        }
        Probe::UpperTouch { idx, .. } | Probe::Pinch { idx } | Probe::DualTouch { idx } => {
            let t = bounds.events[idx].t;
            Some((t, BoundSide::Upper, r * t))
        }
        Probe::LowerStrict { idx } | Probe::LowerTouch { idx } => {
            let t = bounds.events[idx].t;
            Some((t, BoundSide::Lower, r * t))
        }
        Probe::Clear => None,
    }
}

/// Total data the line `r·t` can carry before it strictly hits the upper
/// bound at some event, continuing through corners it merely grazes. A line
/// that survives every event can reach the full remaining total (whether the
/// energy suffices is the pooling loop's question, not this one's).
pub fn data_deliverable(r: f64, bounds: &BoundPair) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    for (i, ev) in bounds.events.iter().enumerate() {
        let v = r * ev.t;
        let cap = bounds.cap_before(i);
        if !cap.is_finite() {
            continue;
        }
        let tol = amount_tol(cap.max(v));
        if v > cap + tol {
            return cap;
        }
        if (v - cap).abs() <= tol && bounds.cap_after(i) <= v + tol {
            return v;
        }
    }
    bounds.total_data
}

/// Feasible-corner enumeration: the infimum rate to the upper-bound corners
/// and the supremum rate to the lower-bound corners, with witness instants.
pub fn rate_bounds(bounds: &BoundPair) -> Result<RateBounds, NoFeasibleUpper> {
    let mut upper_corner_seen = false;
    let mut r_max = f64::INFINITY;
    let mut z_max = f64::INFINITY;
    for (i, ev) in bounds.events.iter().enumerate() {
        if !bounds.has_upper_jump(i) || !bounds.cap_before(i).is_finite() {
            continue;
        }
        upper_corner_seen = true;
        let rate = bounds.cap_before(i) / ev.t;
        if !line_feasible(rate, bounds, ev.t) {
            continue;
        }
        // Infimum of the candidate rates; ties keep the earliest corner so
        // the epoch ends at the first touch and the next iteration re-decides.
        if rate < r_max - amount_tol(r_max.min(1.0)) {
            r_max = rate;
            z_max = ev.t;
        }
    }
    if upper_corner_seen && !r_max.is_finite() {
        return Err(NoFeasibleUpper);
    }

    let mut r_min = 0.0;
    let mut z_min = f64::INFINITY;
    for (i, ev) in bounds.events.iter().enumerate() {
        if !bounds.has_lower_jump(i) {
            continue;
        }
        let rate = bounds.floor_after(i) / ev.t;
        if !line_feasible(rate, bounds, ev.t) {
            continue;
        }
        if rate > r_min + amount_tol(r_min) {
            r_min = rate;
            z_min = ev.t;
        }
    }
    Ok(RateBounds {
        r_max,
        z_max,
        r_min,
        z_min,
    })
}
