//! Minimum-completion-time transmission scheduling for an energy-harvesting
//! transmitter with a finite battery, packetized data/energy arrivals, and
//! QoS constraints (offline setting).
//!
//! The solver works in the cumulative-curve picture: data arrivals, quality
//! floors, and battery-derived bounds are staircase curves; the optimal data
//! departure curve is piecewise linear between them. Besides the solver the
//! crate ships the empty-buffers baseline it is benchmarked against, a
//! brute-force dynamic-programming oracle, and a seeded Monte-Carlo harness.

pub mod baseline;
pub mod curves;
pub mod mapping;
pub mod oracle;
pub mod power_rate;
pub mod scenario;
pub mod scheduler;
pub mod sim;
pub mod validate;

pub use power_rate::PowerRateModel;
pub use scenario::{QosSpec, Scenario, ScenarioError};
pub use scheduler::{solve, Epoch, InfeasibleWitness, Schedule, SolveError, SolveOutcome};
pub use validate::{validate, ValidationReport};
