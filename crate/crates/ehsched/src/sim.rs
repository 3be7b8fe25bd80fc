//! Seeded Monte-Carlo harness: uniform random arrival patterns, energy
//! amounts normalized to a swept total, paired runs of the optimal solver and
//! the empty-buffers baseline, and CSV output of the per-level statistics.

use crate::baseline::ebs_solve;
use crate::power_rate::PowerRateModel;
use crate::scenario::{QosSpec, Scenario};
use crate::scheduler::solve;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid experiment config: {0}")]
    BadConfig(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no result rows to write")]
    NoRows,
}

/// Random-experiment parameters. Arrival patterns depend only on
/// `(seed, trial)`, so the same trial is re-scored at every energy level
/// with only its packet energies rescaled.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trials: u32,
    pub seed: u64,
    pub energy_levels: Vec<f64>,
    pub n_data: u32,
    pub n_energy: u32,
    pub horizon: f64,
    pub total_data: f64,
    pub c_max: f64,
    pub qos: QosSpec,
    pub model: PowerRateModel,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            trials: 1000,
            seed: 7,
            energy_levels: vec![1.0, 1.5, 2.0, 2.5],
            n_data: 3,
            n_energy: 3,
            horizon: 1.0,
            total_data: 1.0,
            c_max: 1.0,
            qos: QosSpec::uniform_deadline(0.9),
            model: PowerRateModel::shannon_unit(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.trials == 0 {
            return Err(SimError::BadConfig("trials must be positive".into()));
        }
        if self.energy_levels.is_empty() {
            return Err(SimError::BadConfig("energy sweep must be non-empty".into()));
        }
        if self.n_data == 0 || self.n_energy == 0 {
            return Err(SimError::BadConfig("packet counts must be positive".into()));
        }
        let cap_total = self.n_energy as f64 * self.c_max;
        for &lvl in &self.energy_levels {
            if !(lvl > 0.0) {
                return Err(SimError::BadConfig(format!(
                    "energy level {lvl} not positive"
                )));
            }
            if lvl > cap_total * 0.999 {
                return Err(SimError::BadConfig(format!(
                    "energy level {lvl} cannot fit into {} packets of at most {} J",
                    self.n_energy, self.c_max
                )));
            }
        }
        Ok(())
    }
}

/// Per-level aggregate: means are over feasible trials only, and the
/// baseline's mean is paired (restricted to trials the optimum also solves).
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub energy_level: f64,
    pub opt_mean_t: f64,
    pub opt_feasible_pct: f64,
    pub ebs_mean_t: f64,
    pub ebs_feasible_pct: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    /// Solver errors, one entry per failed trial; never silently dropped.
    pub failures: Vec<String>,
}

fn trial_rng(seed: u64, trial: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Raw per-trial arrival pattern, shared across all energy levels.
struct TrialPattern {
    energy_times: Vec<f64>,
    energy_weights: Vec<f64>,
    data: Vec<(f64, f64)>,
}

fn draw_pattern(cfg: &ExperimentConfig, trial: u32) -> TrialPattern {
    let mut rng = trial_rng(cfg.seed, trial);
    let mut energy_times = vec![0.0];
    for _ in 1..cfg.n_energy {
        energy_times.push(rng.random_range(0.0..cfg.horizon));
    }
    let energy_weights: Vec<f64> = (0..cfg.n_energy)
        .map(|_| rng.random_range(0.2..1.0))
        .collect();
    let mut data_times: Vec<f64> = vec![0.0];
    for _ in 1..cfg.n_data {
        data_times.push(rng.random_range(0.0..cfg.horizon));
    }
    let data_weights: Vec<f64> = (0..cfg.n_data)
        .map(|_| rng.random_range(0.2..1.0))
        .collect();
    let wsum: f64 = data_weights.iter().sum();
    let data = data_times
        .into_iter()
        .zip(&data_weights)
        .map(|(t, w)| (t, w / wsum * cfg.total_data))
        .collect();
    TrialPattern {
        energy_times,
        energy_weights,
        data,
    }
}

/// Splits `level` Joules over the pattern's weights, clamping every packet at
/// the battery capacity and pushing the excess onto packets with headroom.
fn energy_amounts(pattern: &TrialPattern, level: f64, c_max: f64) -> Vec<f64> {
    let wsum: f64 = pattern.energy_weights.iter().sum();
    let mut amounts: Vec<f64> = pattern
        .energy_weights
        .iter()
        .map(|w| w / wsum * level)
        .collect();
    for _ in 0..amounts.len() {
        let excess: f64 = amounts.iter().map(|a| (a - c_max).max(0.0)).sum();
        if excess <= 1e-12 * level {
            break;
        }
        let headroom: f64 = amounts
            .iter()
            .map(|a| if *a < c_max { c_max - *a } else { 0.0 })
            .sum();
        for a in amounts.iter_mut() {
            if *a > c_max {
                *a = c_max;
            } else if headroom > 0.0 {
                *a += excess * (c_max - *a) / headroom;
            }
        }
    }
    amounts
}

/// Builds the scenario for `(seed, trial)` with packet energies summing to
/// `energy_level`. Identical inputs yield identical scenarios.
pub fn generate_scenario(
    cfg: &ExperimentConfig,
    trial: u32,
    energy_level: f64,
) -> Result<Scenario, crate::scenario::ScenarioError> {
    let pattern = draw_pattern(cfg, trial);
    let amounts = energy_amounts(&pattern, energy_level, cfg.c_max);
    let energy: Vec<(f64, f64)> = pattern.energy_times.iter().copied().zip(amounts).collect();
    Scenario::new(
        cfg.model,
        cfg.c_max,
        energy,
        pattern.data.clone(),
        cfg.qos.clone(),
    )
}

/// Runs the full sweep: every trial is solved by both solvers at every energy
/// level; rows come back ordered by level.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, SimError> {
    cfg.validate()?;
    let mut levels = cfg.energy_levels.clone();
    levels.sort_by(f64::total_cmp);
    let mut report = ExperimentReport::default();

    for &level in &levels {
        let mut opt_sum = KahanSum::default();
        let mut ebs_sum = KahanSum::default();
        let mut opt_ok = 0u32;
        let mut ebs_ok = 0u32;
        for trial in 0..cfg.trials {
            let sc = match generate_scenario(cfg, trial, level) {
                Ok(sc) => sc,
                Err(e) => {
                    report
                        .failures
                        .push(format!("level {level} trial {trial}: generation: {e}"));
                    continue;
                }
            };
            let opt = match solve(&sc) {
                Ok(o) => o,
                Err(e) => {
                    report
                        .failures
                        .push(format!("level {level} trial {trial}: optimal: {e}"));
                    continue;
                }
            };
            let ebs = match ebs_solve(&sc) {
                Ok(o) => o,
                Err(e) => {
                    report
                        .failures
                        .push(format!("level {level} trial {trial}: baseline: {e}"));
                    continue;
                }
            };
            if let Some(s) = opt.schedule() {
                opt_ok += 1;
                opt_sum.add(s.completion_time / cfg.horizon);
                if let Some(b) = ebs.schedule() {
                    ebs_ok += 1;
                    ebs_sum.add(b.completion_time / cfg.horizon);
                }
            }
        }
        report.rows.push(ResultRow {
            energy_level: level,
            opt_mean_t: opt_sum.mean(opt_ok),
            opt_feasible_pct: 100.0 * opt_ok as f64 / cfg.trials as f64,
            ebs_mean_t: ebs_sum.mean(ebs_ok),
            ebs_feasible_pct: 100.0 * ebs_ok as f64 / cfg.trials as f64,
        });
    }
    Ok(report)
}

#[derive(Default)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn mean(&self, n: u32) -> f64 {
        if n == 0 {
            f64::NAN
        } else {
            self.sum / n as f64
        }
    }
}

/// Writes rows as CSV with 12 significant digits; identical rows produce
/// byte-identical files.
pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<(), SimError> {
    if rows.is_empty() {
        return Err(SimError::NoRows);
    }
    let render = results_csv(rows);
    let mut file = std::fs::File::create(path).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(render.as_bytes())
        .map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out =
        String::from("energy_level,opt_mean_T,opt_feasible_pct,ebs_mean_T,ebs_feasible_pct\n");
    for r in rows {
        out.push_str(&format!(
            "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}\n",
            r.energy_level, r.opt_mean_t, r.opt_feasible_pct, r.ebs_mean_t, r.ebs_feasible_pct
        ));
    }
    out
}
