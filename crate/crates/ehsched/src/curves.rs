//! Cumulative-curve primitives: right-continuous staircase curves with
//! one-sided evaluation, origin rescaling, and the battery-derived
//! accumulated-energy / minimum-expenditure curves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance under which two time instants count as simultaneous.
pub const TIME_EPS: f64 = 1e-9;

/// Relative tolerance for amount (bits / Joules) comparisons.
pub const AMOUNT_EPS: f64 = 1e-9;

/// True when `a` and `b` are the same instant up to `TIME_EPS` scaled by magnitude.
pub fn times_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIME_EPS * a.abs().max(b.abs()).max(1.0)
}

/// Absolute comparison tolerance scaled by the magnitude of the operands.
pub fn amount_tol(scale: f64) -> f64 {
    AMOUNT_EPS * scale.abs().max(1.0)
}

/// Which one-sided limit of a step function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("per-packet parameter list has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("negative delay {0} in deadline constraint")]
    NegativeDelay(f64),
}

/// A non-decreasing step curve: `base` before the first jump, then a strictly
/// increasing sequence of `(time, increment)` jumps. Evaluation is one-sided,
/// so both `f(t^-)` and `f(t^+)` are available at jump instants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Staircase {
    base: f64,
    jumps: Vec<(f64, f64)>,
}

impl Staircase {
    /// Builds a staircase, coalescing simultaneous jumps (within `TIME_EPS`)
    /// by summing their increments and dropping non-positive increments.
    pub fn new(base: f64, jumps: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut raw: Vec<(f64, f64)> = jumps.into_iter().collect();
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut coalesced: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (t, inc) in raw {
            if inc <= 0.0 {
                continue;
            }
            match coalesced.last_mut() {
                Some(last) if times_equal(last.0, t) => last.1 += inc,
                _ => coalesced.push((t, inc)),
            }
        }
        Staircase {
            base,
            jumps: coalesced,
        }
    }

    pub fn flat(base: f64) -> Self {
        Staircase {
            base,
            jumps: Vec::new(),
        }
    }

    /// Value just before (`Side::Left`) or just after (`Side::Right`) instant `t`.
    pub fn eval(&self, t: f64, side: Side) -> f64 {
        assert!(t >= -TIME_EPS, "staircase evaluated at negative time {t}");
        let mut acc = self.base;
        for &(jt, inc) in &self.jumps {
            let counted = match side {
                Side::Right => jt <= t || times_equal(jt, t),
                Side::Left => jt < t && !times_equal(jt, t),
            };
            if counted {
                acc += inc;
            } else {
                break;
            }
        }
        acc
    }

    /// Increment exactly at `t` (0 when `t` is not a jump instant).
    pub fn jump_at(&self, t: f64) -> f64 {
        self.jumps
            .iter()
            .find(|(jt, _)| times_equal(*jt, t))
            .map(|(_, inc)| *inc)
            .unwrap_or(0.0)
    }

    pub fn jumps(&self) -> &[(f64, f64)] {
        &self.jumps
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    /// Value past the last jump.
    pub fn total(&self) -> f64 {
        self.base + self.jumps.iter().map(|(_, inc)| inc).sum::<f64>()
    }

    /// The curve `t ↦ {self(t + tau) − offset}^+` as a staircase. Jumps at
    /// instants strictly before `tau` fold into the base; a jump partially
    /// swallowed by the clamp keeps only its visible remainder.
    pub fn shift_rescale(&self, tau: f64, offset: f64) -> Staircase {
        assert!(tau >= -TIME_EPS && offset >= -AMOUNT_EPS);
        let mut level = self.base - offset;
        let mut fold_end = 0;
        for (i, &(jt, inc)) in self.jumps.iter().enumerate() {
            if jt < tau && !times_equal(jt, tau) {
                level += inc;
                fold_end = i + 1;
            } else {
                break;
            }
        }
        let base = level.max(0.0);
        let mut clamped = base;
        let mut out = Vec::with_capacity(self.jumps.len() - fold_end);
        for &(jt, inc) in &self.jumps[fold_end..] {
            level += inc;
            let new_clamped = level.max(0.0);
            let visible = new_clamped - clamped;
            if visible > 0.0 {
                out.push(((jt - tau).max(0.0), visible));
            }
            clamped = new_clamped;
        }
        Staircase::new(base, out)
    }
}

/// Maps per-packet deadlines onto the minimum-departure staircase: packet `k`
/// arriving at `d_k` with delay budget `theta_k` must be fully out by `d_k + theta_k`.
pub fn qos_deadline(data_packets: &[(f64, f64)], theta: &[f64]) -> Result<Staircase, CurveError> {
    if data_packets.len() != theta.len() {
        return Err(CurveError::LengthMismatch {
            expected: data_packets.len(),
            got: theta.len(),
        });
    }
    if let Some(&bad) = theta.iter().find(|&&x| x < 0.0) {
        return Err(CurveError::NegativeDelay(bad));
    }
    Ok(Staircase::new(
        0.0,
        data_packets
            .iter()
            .zip(theta)
            .map(|(&(d, bits), &th)| (d + th, bits)),
    ))
}

/// Maps a finite receive queue of `beta` bits onto the minimum-departure
/// staircase `{D_A(t) − beta}^+`.
pub fn qos_buffer(data_curve: &Staircase, beta: f64) -> Staircase {
    assert!(beta >= 0.0, "queue size must be non-negative");
    data_curve.shift_rescale(0.0, beta)
}

/// Energy arrivals plus the overflows recorded against them so far.
/// `accumulated_battery(t_x, t)` follows the convention that overflows are
/// only known (and therefore only subtracted) for arrivals at or before `t_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTimeline {
    arrivals: Vec<(f64, f64)>,
    overflows: Vec<(f64, f64)>,
}

impl EnergyTimeline {
    pub fn new(arrivals: Vec<(f64, f64)>) -> Self {
        let mut arrivals = arrivals;
        arrivals.sort_by(|a, b| a.0.total_cmp(&b.0));
        EnergyTimeline {
            arrivals,
            overflows: Vec::new(),
        }
    }

    pub fn arrivals(&self) -> &[(f64, f64)] {
        &self.arrivals
    }

    pub fn overflows(&self) -> &[(f64, f64)] {
        &self.overflows
    }

    pub fn record_overflow(&mut self, t: f64, amount: f64) {
        debug_assert!(amount > 0.0);
        self.overflows.push((t, amount));
    }

    pub fn total_overflow(&self) -> f64 {
        self.overflows.iter().map(|(_, o)| o).sum()
    }

    /// Harvested energy through `t` (inclusive) minus the overflows recorded
    /// for arrivals at or before `t_x`.
    pub fn accumulated_battery(&self, t_x: f64, t: f64) -> f64 {
        let harvested: f64 = self
            .arrivals
            .iter()
            .filter(|(e, _)| *e <= t || times_equal(*e, t))
            .map(|(_, amt)| amt)
            .sum();
        harvested - self.overflow_through(t_x, t)
    }

    /// Same as [`accumulated_battery`](Self::accumulated_battery) but with the
    /// left limit in `t` (arrivals exactly at `t` excluded).
    pub fn accumulated_battery_before(&self, t_x: f64, t: f64) -> f64 {
        let harvested: f64 = self
            .arrivals
            .iter()
            .filter(|(e, _)| *e < t && !times_equal(*e, t))
            .map(|(_, amt)| amt)
            .sum();
        let mut spilled = 0.0;
        for &(ot, o) in &self.overflows {
            if (ot <= t_x || times_equal(ot, t_x)) && ot < t && !times_equal(ot, t) {
                spilled += o;
            }
        }
        harvested - spilled
    }

    fn overflow_through(&self, t_x: f64, t: f64) -> f64 {
        self.overflows
            .iter()
            .filter(|(ot, _)| {
                (*ot <= t_x || times_equal(*ot, t_x)) && (*ot <= t || times_equal(*ot, t))
            })
            .map(|(_, o)| o)
            .sum()
    }

    /// Smallest cumulative spend by `t` that avoids battery overflow in
    /// `(t_x, t]`: `{accumulated_battery(t_x, t) − c_max}^+`.
    pub fn min_energy_expenditure(&self, c_max: f64, t_x: f64, t: f64) -> f64 {
        (self.accumulated_battery(t_x, t) - c_max).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_step() -> Staircase {
        Staircase::new(0.0, [(0.0, 2.0), (1.0, 3.0)])
    }

    #[test]
    fn eval_one_sided() {
        let c = two_step();
        assert_eq!(c.eval(1.0, Side::Right), 5.0);
        assert_eq!(c.eval(1.0, Side::Left), 2.0);
        assert_eq!(c.eval(0.5, Side::Left), 2.0);
        assert_eq!(c.eval(0.0, Side::Right), 2.0);
        assert_eq!(c.eval(0.0, Side::Left), 0.0);
    }

    #[test]
    fn eval_empty_curve() {
        let c = Staircase::flat(0.0);
        assert_eq!(c.eval(7.0, Side::Right), 0.0);
    }

    #[test]
    #[should_panic]
    fn eval_negative_time_is_a_domain_error() {
        two_step().eval(-1.0, Side::Right);
    }

    #[test]
    fn simultaneous_jumps_coalesce() {
        let c = Staircase::new(0.0, [(1.0, 1.0), (1.0 + 1e-12, 2.0)]);
        assert_eq!(c.jumps().len(), 1);
        assert_eq!(c.jump_at(1.0), 3.0);
    }

    #[test]
    fn shift_rescale_folds_and_offsets() {
        let c = two_step();
        let s = c.shift_rescale(0.5, 2.0);
        assert_eq!(s.base(), 0.0);
        assert_eq!(s.jumps(), &[(0.5, 3.0)]);
    }

    #[test]
    fn shift_rescale_identity() {
        let c = two_step();
        let s = c.shift_rescale(0.0, 0.0);
        assert_eq!(s, c);
    }

    #[test]
    fn shift_rescale_folds_past_jumps() {
        let c = Staircase::new(0.0, [(1.0, 3.0)]);
        let s = c.shift_rescale(2.0, 1.0);
        assert_eq!(s.base(), 2.0);
        assert!(s.jumps().is_empty());
    }

    #[test]
    fn shift_rescale_partially_swallows_a_jump() {
        // {f(t) − 1}^+ with f jumping 0 → 3 at t=1: clamp eats 1 of the 3.
        let c = Staircase::new(0.0, [(1.0, 3.0)]);
        let s = c.shift_rescale(0.0, 1.0);
        assert_eq!(s.base(), 0.0);
        assert_eq!(s.jumps(), &[(1.0, 2.0)]);
        assert_eq!(s.eval(1.0, Side::Right), 2.0);
    }

    #[test]
    fn qos_deadline_shifts_per_packet() {
        let d = qos_deadline(&[(0.0, 2.0)], &[1.0]).unwrap();
        assert_eq!(d.jumps(), &[(1.0, 2.0)]);

        let zero = qos_deadline(&[(0.0, 2.0), (1.0, 1.0)], &[0.0, 0.0]).unwrap();
        assert_eq!(zero, Staircase::new(0.0, [(0.0, 2.0), (1.0, 1.0)]));

        let merged = qos_deadline(&[(0.0, 1.0), (1.0, 1.0)], &[2.0, 1.0]).unwrap();
        assert_eq!(merged.jumps(), &[(2.0, 2.0)]);
    }

    #[test]
    fn qos_deadline_length_mismatch() {
        assert!(matches!(
            qos_deadline(&[(0.0, 1.0)], &[1.0, 2.0]),
            Err(CurveError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn qos_buffer_clamps() {
        let d_a = Staircase::new(0.0, [(0.0, 2.0), (1.0, 3.0)]);
        let q = qos_buffer(&d_a, 2.0);
        assert_eq!(q.jumps(), &[(1.0, 3.0)]);
        assert_eq!(q.eval(0.5, Side::Right), 0.0);

        let all = qos_buffer(&d_a, 5.0);
        assert_eq!(all.total(), 0.0);

        let none = qos_buffer(&d_a, 0.0);
        assert_eq!(none, d_a);
    }

    #[test]
    fn accumulated_battery_respects_overflow_knowledge() {
        let mut tl = EnergyTimeline::new(vec![(0.0, 1.0), (1.0, 1.0)]);
        tl.record_overflow(1.0, 0.5);
        assert_eq!(tl.accumulated_battery(1.0, 1.5), 1.5);
        assert_eq!(tl.accumulated_battery(0.5, 1.5), 2.0);
        assert_eq!(tl.accumulated_battery(0.0, 0.0), 1.0);
    }

    #[test]
    fn min_energy_expenditure_clamps() {
        let tl = EnergyTimeline::new(vec![(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]);
        assert_eq!(tl.min_energy_expenditure(1.5, 0.0, 1.0), 0.5);
        assert_eq!(tl.min_energy_expenditure(1.5, 0.0, 0.5), 0.0);
        assert_eq!(tl.min_energy_expenditure(1.0, 0.0, 2.5), 2.0);
    }

    #[test]
    fn accumulated_battery_monotone() {
        let mut tl = EnergyTimeline::new(vec![(0.0, 1.0), (1.0, 2.0), (3.0, 1.0)]);
        tl.record_overflow(1.0, 0.7);
        let times = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0];
        for w in times.windows(2) {
            assert!(tl.accumulated_battery(0.5, w[0]) <= tl.accumulated_battery(0.5, w[1]));
            // non-increasing in t_x for fixed t
            assert!(tl.accumulated_battery(w[0], 4.0) >= tl.accumulated_battery(w[1], 4.0));
        }
    }
}
