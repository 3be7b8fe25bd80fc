//! The power-rate function `g(·)` — convex, increasing, `g(0) = 0` — its
//! inverse, and the even-allocation solver that finds the constant rate
//! spending a given energy budget on a given number of bits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PowerError {
    #[error("no finite horizon spends {energy} J on {bits} bits (limit {limit} J)")]
    NoSolution { bits: f64, energy: f64, limit: f64 },
    #[error("even-allocation bisection failed to converge (residual {residual})")]
    NoConvergence { residual: f64 },
}

/// Transmit-power models `p = g(r)`.
///
/// `Shannon` is the AWGN-capacity inverse `g(r) = n·(2^{r/w} − 1)` with
/// bandwidth `w` and total noise power `n`; `Monomial` is `g(r) = a·r^k`
/// with `k > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PowerRateModel {
    Shannon { bandwidth: f64, noise_power: f64 },
    Monomial { exponent: f64, scale: f64 },
}

impl PowerRateModel {
    /// `g(r) = 2^r − 1`, the unit-bandwidth unit-noise AWGN model.
    pub fn shannon_unit() -> Self {
        PowerRateModel::Shannon {
            bandwidth: 1.0,
            noise_power: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            PowerRateModel::Shannon {
                bandwidth,
                noise_power,
            } => {
                if bandwidth <= 0.0 || noise_power <= 0.0 {
                    return Err(format!(
                        "shannon model needs positive bandwidth and noise power, got {bandwidth}, {noise_power}"
                    ));
                }
            }
            PowerRateModel::Monomial { exponent, scale } => {
                if exponent <= 1.0 || scale <= 0.0 {
                    return Err(format!(
                        "monomial model needs exponent > 1 and positive scale, got {exponent}, {scale}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Power needed to sustain rate `r`.
    pub fn power(&self, r: f64) -> f64 {
        assert!(r >= 0.0, "rate must be non-negative, got {r}");
        match *self {
            PowerRateModel::Shannon {
                bandwidth,
                noise_power,
            } => noise_power * ((r / bandwidth).exp2() - 1.0),
            PowerRateModel::Monomial { exponent, scale } => scale * r.powf(exponent),
        }
    }

    /// Rate sustained by power `p`: the unique `r` with `g(r) = p`.
    pub fn rate(&self, p: f64) -> f64 {
        assert!(p >= 0.0, "power must be non-negative, got {p}");
        match *self {
            PowerRateModel::Shannon {
                bandwidth,
                noise_power,
            } => bandwidth * (1.0 + p / noise_power).log2(),
            PowerRateModel::Monomial { exponent, scale } => (p / scale).powf(1.0 / exponent),
        }
    }

    /// Most bits deliverable in `[0, t]` with energy budget `e` at constant
    /// power: `g^{-1}(e/t)·t`. Concave and non-decreasing in `t`.
    pub fn max_bits(&self, e: f64, t: f64) -> f64 {
        assert!(e >= -1e-12, "energy must be non-negative, got {e}");
        let e = e.max(0.0);
        if t <= 0.0 || e == 0.0 {
            return 0.0;
        }
        self.rate(e / t) * t
    }

    /// `g'(0+)`: the asymptotic Joules-per-bit floor. Positive for Shannon
    /// models (finite capacity per Joule), zero for monomials.
    pub fn min_energy_per_bit(&self) -> f64 {
        match *self {
            PowerRateModel::Shannon {
                bandwidth,
                noise_power,
            } => noise_power * std::f64::consts::LN_2 / bandwidth,
            PowerRateModel::Monomial { .. } => 0.0,
        }
    }

    /// Most bits `e` Joules can ever carry, over an unbounded horizon:
    /// `lim_{t→∞} max_bits(e, t)`. Infinite for models with no per-bit floor.
    pub fn bits_limit(&self, e: f64) -> f64 {
        if e <= 0.0 {
            return 0.0;
        }
        let mepb = self.min_energy_per_bit();
        if mepb > 0.0 {
            e / mepb
        } else {
            f64::INFINITY
        }
    }

    /// Solves `g(d/T)·T = e` for the horizon `T` that spends exactly `e`
    /// Joules delivering `d` bits at constant rate; returns `(T, d/T)`.
    ///
    /// The map `T ↦ g(d/T)·T` is strictly decreasing with limit
    /// `d·min_energy_per_bit()`, so a root exists iff `e` exceeds that limit.
    pub fn even_allocation(&self, d: f64, e: f64) -> Result<(f64, f64), PowerError> {
        if d <= 0.0 {
            return Ok((0.0, 0.0));
        }
        let limit = d * self.min_energy_per_bit();
        if e <= limit * (1.0 + 1e-12) || e <= 0.0 {
            return Err(PowerError::NoSolution {
                bits: d,
                energy: e,
                limit,
            });
        }
        let spend = |t: f64| self.power(d / t) * t - e;

        // Bracket the root by doubling/halving around an initial guess.
        let mut lo = d / self.rate(e).max(1e-300); // fast end: spend(lo) ≥ 0
        if !(spend(lo) > 0.0) {
            let mut tries = 0;
            while !(spend(lo) > 0.0) {
                lo /= 2.0;
                tries += 1;
                if tries > 2000 {
                    return Err(PowerError::NoConvergence {
                        residual: spend(lo),
                    });
                }
            }
        }
        let mut hi = lo;
        let mut tries = 0;
        while spend(hi) > 0.0 {
            hi *= 2.0;
            tries += 1;
            if tries > 2000 {
                return Err(PowerError::NoSolution {
                    bits: d,
                    energy: e,
                    limit,
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if spend(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) <= 1e-15 * hi {
                break;
            }
        }
        let t_hat = 0.5 * (lo + hi);
        let residual = (self.power(d / t_hat) * t_hat - e).abs();
        if residual > 1e-9 * e.max(1.0) {
            return Err(PowerError::NoConvergence { residual });
        }
        Ok((t_hat, d / t_hat))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> PowerRateModel {
        PowerRateModel::shannon_unit()
    }

    #[test]
    fn shannon_power_values() {
        let g = unit();
        assert_eq!(g.power(0.0), 0.0);
        assert!((g.power(1.0) - 1.0).abs() < 1e-12);
        assert!((g.power(2.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rate_inverts_power() {
        let g = unit();
        assert_eq!(g.rate(0.0), 0.0);
        assert!((g.rate(3.0) - 2.0).abs() < 1e-12);
        let m = PowerRateModel::Monomial {
            exponent: 2.0,
            scale: 1.0,
        };
        assert!((m.rate(4.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn max_bits_values() {
        let g = unit();
        assert!((g.max_bits(1.0, 1.0) - 1.0).abs() < 1e-12);
        // g^{-1}(3/2)·2 = 2·log2(2.5), cross-checked through power():
        let direct = 2.0 * (2.5f64).log2();
        assert!((g.max_bits(3.0, 2.0) - direct).abs() < 1e-12);
        assert!((g.power(g.max_bits(3.0, 2.0) / 2.0) * 2.0 - 3.0).abs() < 1e-9);
        assert_eq!(g.max_bits(0.0, 5.0), 0.0);
        assert_eq!(g.max_bits(1.0, 0.0), 0.0);
    }

    #[test]
    fn even_allocation_fixed_points() {
        let g = unit();
        let (t, r) = g.even_allocation(1.0, 1.0).unwrap();
        assert!((t - 1.0).abs() < 1e-9 && (r - 1.0).abs() < 1e-9);
        let (t, r) = g.even_allocation(2.0, 2.0).unwrap();
        assert!((t - 2.0).abs() < 1e-9 && (r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn even_allocation_bisected_case() {
        // (2^{1/T} − 1)·T = 3; trust only after checking the residual.
        let g = unit();
        let (t, r) = g.even_allocation(1.0, 3.0).unwrap();
        assert!((g.power(r) * t - 3.0).abs() <= 1e-9 * 3.0);
        assert!((t - 0.2827).abs() < 1e-3, "T̂ = {t}");
    }

    #[test]
    fn even_allocation_degenerate_inputs() {
        let g = unit();
        assert_eq!(g.even_allocation(0.0, 5.0).unwrap(), (0.0, 0.0));
        assert!(matches!(
            g.even_allocation(1.0, 0.0),
            Err(PowerError::NoSolution { .. })
        ));
        // Below the Joules-per-bit floor no horizon works.
        assert!(matches!(
            g.even_allocation(2.0, 1.0),
            Err(PowerError::NoSolution { .. })
        ));
    }

    #[test]
    fn monomial_always_solvable() {
        let m = PowerRateModel::Monomial {
            exponent: 2.0,
            scale: 1.0,
        };
        let (t, r) = m.even_allocation(1.0, 0.001).unwrap();
        assert!((m.power(r) * t - 0.001).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rate_power_roundtrip(r in 0.0f64..20.0) {
            let g = unit();
            let back = g.rate(g.power(r));
            prop_assert!((back - r).abs() <= 1e-9 * r.max(1.0));
        }

        /// Any non-constant piecewise-constant profile moving the same bits
        /// over the same horizon spends at least the straight-line energy.
        #[test]
        fn constant_rate_minimizes_energy(
            rates in proptest::collection::vec(0.0f64..4.0, 2..6),
            lens in proptest::collection::vec(0.1f64..1.0, 2..6),
        ) {
            let g = unit();
            let n = rates.len().min(lens.len());
            let (rates, lens) = (&rates[..n], &lens[..n]);
            let horizon: f64 = lens.iter().sum();
            let bits: f64 = rates.iter().zip(lens).map(|(r, l)| r * l).sum();
            let spent: f64 = rates.iter().zip(lens).map(|(r, l)| g.power(*r) * l).sum();
            let straight = g.power(bits / horizon) * horizon;
            prop_assert!(spent >= straight - 1e-9 * straight.max(1.0));
        }

        #[test]
        fn even_allocation_horizon_shrinks_with_energy(d in 0.1f64..5.0, e in 0.1f64..5.0) {
            let g = unit();
            prop_assume!(e > d * g.min_energy_per_bit() * 1.01);
            let (t1, _) = g.even_allocation(d, e).unwrap();
            let (t2, _) = g.even_allocation(d, e * 1.5).unwrap();
            prop_assert!(t2 < t1);
        }

        #[test]
        fn max_bits_rate_non_increasing_in_t(e in 0.1f64..5.0, t in 0.1f64..5.0) {
            let g = unit();
            let r1 = g.max_bits(e, t) / t;
            let r2 = g.max_bits(e, 2.0 * t) / (2.0 * t);
            prop_assert!(r2 <= r1 + 1e-12);
        }
    }
}
