//! The empty-buffers baseline: at every arrival it retargets a constant rate
//! that drains the data buffer exactly by the next arrival, without checking
//! whether anything slower would also work. Used as the comparison heuristic
//! for the optimal solver.

use crate::curves::{amount_tol, times_equal, Side};
use crate::scenario::Scenario;
use crate::scheduler::{Epoch, InfeasibleWitness, Schedule, SolveError, SolveOutcome};

/// Runs the empty-buffers strategy. Between consecutive arrivals it transmits
/// at the rate that empties the buffered data exactly at the next arrival;
/// when the battery cannot pay for that rate the strategy gives up (it never
/// slows down to stay solvent). After the last arrival it finishes with a
/// single even-allocation epoch over whatever is left.
pub fn ebs_solve(sc: &Scenario) -> Result<SolveOutcome, SolveError> {
    let total = sc.total_data();
    let tol_bits = amount_tol(total);

    let due_at_start = sc.qos_curve().eval(0.0, Side::Right);
    if due_at_start > tol_bits {
        return Ok(SolveOutcome::Infeasible(InfeasibleWitness {
            q: 0.0,
            required: due_at_start,
            achievable: 0.0,
            elapsed: 0.0,
            sent_before: 0.0,
            spent_before: 0.0,
            overflows: Vec::new(),
        }));
    }

    // Decision instants: t = 0 plus every distinct arrival (data or energy).
    let mut points: Vec<f64> = vec![0.0];
    for &(t, _) in sc.data_packets().iter().chain(sc.energy_packets()) {
        if !points.iter().any(|&p| times_equal(p, t)) {
            points.push(t);
        }
    }
    points.sort_by(f64::total_cmp);

    let mut epochs: Vec<Epoch> = Vec::new();
    let mut overflows: Vec<(f64, f64)> = Vec::new();
    let mut sent = 0.0;
    let mut spent = 0.0;
    let mut battery = 0.0;

    let infeasible = |q: f64,
                      required: f64,
                      achievable: f64,
                      sent: f64,
                      spent: f64,
                      t: f64,
                      ovf: &[(f64, f64)]| {
        SolveOutcome::Infeasible(InfeasibleWitness {
            q,
            required,
            achievable,
            elapsed: t,
            sent_before: sent,
            spent_before: spent,
            overflows: ovf.to_vec(),
        })
    };

    for (k, &t) in points.iter().enumerate() {
        // Absorb arrivals at t.
        let harvest: f64 = sc
            .energy_packets()
            .iter()
            .filter(|&&(e, _)| times_equal(e, t))
            .map(|(_, amt)| amt)
            .sum();
        if harvest > 0.0 {
            let spill = (battery + harvest - sc.c_max).max(0.0);
            if spill > amount_tol(sc.c_max) {
                overflows.push((t, spill));
            }
            battery = (battery + harvest - spill).min(sc.c_max);
        }

        let buffered = sc.data_curve().eval(t, Side::Right) - sent;
        let next = points.get(k + 1).copied();
        let (rate, len) = match next {
            Some(t_next) => {
                let len = t_next - t;
                if len <= 0.0 {
                    continue;
                }
                let rate = if buffered > tol_bits {
                    buffered / len
                } else {
                    0.0
                };
                (rate, len)
            }
            None => {
                // Tail: even allocation of the remaining battery over the
                // remaining data.
                let remaining = total - sent;
                if remaining <= tol_bits {
                    break;
                }
                match sc.model.even_allocation(remaining, battery) {
                    Ok((t_hat, r_hat)) => (r_hat, t_hat),
                    Err(_) => {
                        return Ok(infeasible(
                            f64::INFINITY,
                            remaining,
                            battery / sc.model.min_energy_per_bit().max(f64::MIN_POSITIVE),
                            sent,
                            spent,
                            t,
                            &overflows,
                        ))
                    }
                }
            }
        };

        let need = sc.model.power(rate) * len;
        if need > battery + amount_tol(sc.c_max) {
            // Emptying the buffer by the next arrival is unaffordable.
            return Ok(infeasible(
                t + len,
                rate * len,
                sc.model.max_bits(battery, len),
                sent,
                spent,
                t,
                &overflows,
            ));
        }

        // Quality floors falling due inside this stretch.
        for &(q, _) in sc.qos_curve().jumps() {
            let inside = q > t && (q < t + len || times_equal(q, t + len));
            if !inside {
                continue;
            }
            let required = sc.qos_curve().eval(q, Side::Right);
            let have = sent + rate * (q - t);
            if have < required - tol_bits {
                return Ok(infeasible(
                    q,
                    required - sent,
                    rate * (q - t),
                    sent,
                    spent,
                    t,
                    &overflows,
                ));
            }
        }

        if rate > 0.0 || next.is_some() {
            epochs.push(Epoch {
                start: t,
                rate,
                len,
                overflow_at_end: 0.0,
            });
        }
        sent += rate * len;
        spent += need;
        battery -= need;
        if sent >= total - tol_bits && next.is_some() {
            // Data finished early; drop any residual waiting.
            let done_at = t + len;
            if sc
                .data_packets()
                .iter()
                .all(|&(d, _)| d <= done_at || times_equal(d, done_at))
            {
                break;
            }
        }
    }

    // Trim trailing zero-rate epochs.
    while matches!(epochs.last(), Some(e) if e.rate == 0.0) {
        epochs.pop();
    }
    let completion_time = epochs.last().map(|e| e.end()).unwrap_or(0.0);
    // Mark overflows landing exactly at an epoch end.
    for ep in &mut epochs {
        let at_end: f64 = overflows
            .iter()
            .filter(|(t, _)| times_equal(*t, ep.end()))
            .map(|(_, o)| o)
            .sum();
        ep.overflow_at_end = if at_end > 0.0 { at_end } else { 0.0 };
    }
    let final_sent: f64 = epochs.iter().map(|e| e.rate * e.len).sum();
    if final_sent < total - tol_bits {
        return Err(SolveError::Internal(format!(
            "baseline finished with {final_sent} of {total} bits"
        )));
    }
    overflows.retain(|&(t, _)| t < completion_time || times_equal(t, completion_time));
    Ok(SolveOutcome::Feasible(Schedule {
        epochs,
        completion_time,
        overflows,
        energy_spent: spent,
    }))
}
