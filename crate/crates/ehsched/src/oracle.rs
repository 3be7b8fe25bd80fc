//! Brute-force verifier: a time-and-state-discretized dynamic program that
//! computes the minimum completion time using nothing but the raw constraint
//! definitions. Rounding is one-sided (energy costs round up, delivered bits
//! round down), so the result never undershoots the true optimum, and
//! refining the grids can only bring it down.

use crate::curves::{times_equal, Side};
use crate::scenario::Scenario;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("event at t = {0} does not sit on the slot grid")]
    MisalignedEvent(f64),
    #[error("data quantum {quantum} does not divide the data total {total}")]
    QuantumMismatch { quantum: f64, total: f64 },
    #[error("state space needs more than {cap} slots; refine the config or raise the cap")]
    SlotCapExceeded { cap: usize },
    #[error("invalid oracle config: {0}")]
    BadConfig(String),
}

/// Discretization of the search: slot width, battery/data quanta, and the
/// rate grid (multiples of `data_quantum / dt`, so per-slot bit gains are
/// exact integers of quanta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub dt: f64,
    pub energy_quantum: f64,
    pub data_quantum: f64,
    pub max_rate: f64,
    pub max_slots: usize,
}

impl OracleConfig {
    /// Grid defaults scaled to the instance: `levels` battery/data levels at
    /// slot width `dt`.
    pub fn for_scenario(sc: &Scenario, dt: f64, levels: u32) -> OracleConfig {
        let total_energy = sc.total_energy();
        let total_data = sc.total_data();
        let r_cap = sc
            .model
            .rate(total_energy / dt)
            .min(total_data / dt)
            .max(total_data / dt * 0.01);
        OracleConfig {
            dt,
            energy_quantum: total_energy / levels as f64,
            data_quantum: total_data / levels as f64,
            max_rate: r_cap,
            max_slots: 400_000,
        }
    }

    /// Same instance, half the slot width and half the quanta.
    pub fn refined(&self) -> OracleConfig {
        OracleConfig {
            dt: self.dt / 2.0,
            energy_quantum: self.energy_quantum / 2.0,
            data_quantum: self.data_quantum / 2.0,
            max_rate: self.max_rate,
            max_slots: self.max_slots * 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleOutcome {
    Feasible { completion_time: f64 },
    Infeasible,
}

impl OracleOutcome {
    pub fn completion_time(&self) -> Option<f64> {
        match self {
            OracleOutcome::Feasible { completion_time } => Some(*completion_time),
            OracleOutcome::Infeasible => None,
        }
    }
}

fn aligned(t: f64, dt: f64) -> bool {
    let k = (t / dt).round();
    (t - k * dt).abs() <= 1e-6 * dt.max(t.abs())
}

/// Forward DP over (slot, battery quanta, sent quanta) states with dominance
/// pruning: per battery level only the largest sent count survives.
pub fn dp_min_time(sc: &Scenario, cfg: &OracleConfig) -> Result<OracleOutcome, OracleError> {
    if !(cfg.dt > 0.0) || !(cfg.energy_quantum > 0.0) || !(cfg.data_quantum > 0.0) {
        return Err(OracleError::BadConfig(
            "dt and quanta must be positive".into(),
        ));
    }
    for &(t, _) in sc.energy_packets().iter().chain(sc.data_packets()) {
        if !aligned(t, cfg.dt) {
            return Err(OracleError::MisalignedEvent(t));
        }
    }
    for &(t, _) in sc.qos_curve().jumps() {
        if !aligned(t, cfg.dt) {
            return Err(OracleError::MisalignedEvent(t));
        }
    }

    let total_data = sc.total_data();
    let goal = (total_data / cfg.data_quantum).round();
    if ((goal * cfg.data_quantum) - total_data).abs() > 1e-6 * total_data {
        return Err(OracleError::QuantumMismatch {
            quantum: cfg.data_quantum,
            total: total_data,
        });
    }
    let goal = goal as u32;
    // Quick analytic rejection: with a Shannon-type model each bit costs at
    // least g'(0+) Joules, no matter the schedule.
    let mepb = sc.model.min_energy_per_bit();
    if mepb > 0.0 && sc.total_energy() <= total_data * mepb {
        return Ok(OracleOutcome::Infeasible);
    }

    let cap_q = (sc.c_max / cfg.energy_quantum + 1e-9).floor() as u32;
    // Rate grid aligned to the data quantum: gain per slot is exactly the
    // grid index, so no delivered bit is ever lost to rounding.
    let rate_unit = cfg.data_quantum / cfg.dt;
    let n_rates = (cfg.max_rate / rate_unit).floor() as u32;
    let mut moves: Vec<(u32, u32)> = Vec::with_capacity(n_rates as usize + 1); // (gain, cost)
    let mut last_cost = None;
    for k in 0..=n_rates {
        let r = k as f64 * rate_unit;
        let cost = (sc.model.power(r) * cfg.dt / cfg.energy_quantum - 1e-12).ceil() as u64;
        if cost > cap_q as u64 {
            break; // unpayable even from a full battery
        }
        let cost = cost as u32;
        if last_cost == Some(cost) && k > 0 {
            // Same cost as a smaller gain: replace it (dominates).
            moves.pop();
        }
        moves.push((k, cost));
        last_cost = Some(cost);
    }

    let last_event = sc.last_event_time();
    let last_event_slot = (last_event / cfg.dt).round() as usize;

    // Frontier: battery level → best sent count, kept as an anti-chain.
    let mut frontier: Vec<(u32, u32)> = vec![(0, 0)];
    let mut scratch: Vec<i64> = vec![-1; cap_q as usize + 1];

    for slot in 0..=cfg.max_slots {
        let t = slot as f64 * cfg.dt;

        // Slot-boundary bookkeeping: harvest (with the capacity cap), QoS
        // pruning, and the completion test.
        let harvest: f64 = sc
            .energy_packets()
            .iter()
            .filter(|&&(e, _)| aligned_eq(e, t, cfg.dt))
            .map(|(_, amt)| amt)
            .sum();
        if harvest > 0.0 {
            let gain = (harvest / cfg.energy_quantum + 1e-9).floor() as u32;
            for st in frontier.iter_mut() {
                st.0 = (st.0 + gain).min(cap_q);
            }
            normalize(&mut frontier);
        }
        let req = sc.qos_curve().eval(t, Side::Right);
        if req > 0.0 {
            let req_q = ((req - 1e-9 * total_data) / cfg.data_quantum).ceil() as u32;
            frontier.retain(|&(_, s)| s >= req_q);
            if frontier.is_empty() {
                return Ok(OracleOutcome::Infeasible);
            }
        }
        if frontier.iter().any(|&(_, s)| s >= goal) {
            return Ok(OracleOutcome::Feasible { completion_time: t });
        }
        // Past the last event nothing refills the battery: states that can
        // never cover the remaining bits are dead, and if all are, so is the
        // instance.
        if slot >= last_event_slot && mepb > 0.0 {
            frontier.retain(|&(b, s)| {
                let future_bits = b as f64 * cfg.energy_quantum / mepb;
                s as f64 * cfg.data_quantum + future_bits >= total_data - 1e-9 * total_data
            });
            if frontier.is_empty() {
                return Ok(OracleOutcome::Infeasible);
            }
        }

        let avail = sc.data_curve().eval(t, Side::Right);
        let avail_q = ((avail / cfg.data_quantum) + 1e-9).floor() as u32;

        // Transmit through the slot.
        for &(b, s) in &frontier {
            for &(gain, cost) in &moves {
                if cost > b {
                    break;
                }
                let s2 = (s + gain).min(avail_q);
                let b2 = (b - cost) as usize;
                if (s2 as i64) > scratch[b2] {
                    scratch[b2] = s2 as i64;
                }
            }
        }
        frontier.clear();
        let mut best = -1i64;
        for b in (0..=cap_q as usize).rev() {
            if scratch[b] > best {
                best = scratch[b];
                frontier.push((b as u32, scratch[b] as u32));
            }
            scratch[b] = -1;
        }
        frontier.reverse();
        if frontier.is_empty() {
            return Ok(OracleOutcome::Infeasible);
        }
    }
    Err(OracleError::SlotCapExceeded { cap: cfg.max_slots })
}

fn aligned_eq(event: f64, t: f64, dt: f64) -> bool {
    times_equal(event, t) || (event - t).abs() <= 1e-6 * dt
}

/// Keeps only non-dominated (battery, sent) states, sorted by battery.
fn normalize(frontier: &mut Vec<(u32, u32)>) {
    frontier.sort_unstable_by_key(|st| std::cmp::Reverse(st.0));
    let mut best = -1i64;
    let mut out = Vec::with_capacity(frontier.len());
    for &(b, s) in frontier.iter() {
        if s as i64 > best {
            best = s as i64;
            out.push((b, s));
        }
    }
    out.reverse();
    *frontier = out;
}
