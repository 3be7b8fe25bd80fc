//! Command-line frontend: scenario I/O, solver selection, schedule
//! validation, oracle runs, and the Monte-Carlo experiment.
//!
//! Exit codes: 0 = schedule found / checks passed, 2 = infeasible, 1 = input
//! or usage error.

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ehsched::oracle::{dp_min_time, OracleConfig, OracleOutcome};
use ehsched::sim::{run_experiment, write_results, ExperimentConfig};
use ehsched::{baseline, scheduler, validate, QosSpec, Scenario, SolveOutcome};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ehsched",
    about = "Minimum-completion-time scheduling for energy-harvesting transmitters",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Solver {
    Optimal,
    Ebs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Human,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a transmission schedule for a scenario file.
    Solve {
        /// Scenario JSON file.
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "optimal")]
        solver: Solver,
        #[arg(long, value_enum, default_value = "human")]
        output: Output,
    },
    /// Check a schedule file against a scenario file.
    Validate {
        scenario: PathBuf,
        schedule: PathBuf,
        /// Also gate the exit code on the optimality-structure checks.
        #[arg(long)]
        strict: bool,
    },
    /// Run the brute-force dynamic-programming verifier.
    Oracle {
        scenario: PathBuf,
        /// Slot width in seconds; all event times must sit on this grid.
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Battery quantum in Joules (default: total energy / 8192).
        #[arg(long)]
        equant: Option<f64>,
        /// Data quantum in bits (default: total data / 8192).
        #[arg(long)]
        dquant: Option<f64>,
        /// Rate-grid ceiling in bits/s (default derived from the instance).
        #[arg(long)]
        rgrid: Option<f64>,
        #[arg(long, default_value_t = 400_000)]
        max_slots: usize,
        /// Skip the comparison run of the optimal solver.
        #[arg(long)]
        no_compare: bool,
    },
    /// Monte-Carlo comparison of the optimal solver and the baseline.
    Simulate {
        /// Experiment config JSON file (flags below override its fields).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trials: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated total-energy sweep, e.g. 1.0,1.5,2.0.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve {
            scenario,
            solver,
            output,
        } => cmd_solve(&scenario, solver, output),
        Command::Validate {
            scenario,
            schedule,
            strict,
        } => cmd_validate(&scenario, &schedule, strict),
        Command::Oracle {
            scenario,
            dt,
            equant,
            dquant,
            rgrid,
            max_slots,
            no_compare,
        } => cmd_oracle(&scenario, dt, equant, dquant, rgrid, max_slots, no_compare),
        Command::Simulate {
            config,
            trials,
            seed,
            levels,
            out,
        } => cmd_simulate(config.as_deref(), trials, seed, levels, &out),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read scenario file {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("cannot parse scenario file {}", path.display()))
}

fn cmd_solve(path: &Path, solver: Solver, output: Output) -> Result<ExitCode> {
    let sc = load_scenario(path)?;
    let outcome = match solver {
        Solver::Optimal => scheduler::solve(&sc)?,
        Solver::Ebs => baseline::ebs_solve(&sc)?,
    };
    match output {
        Output::Json => println!("{}", serde_json::to_string_pretty(&outcome)?),
        Output::Human => print_outcome(&outcome),
    }
    Ok(match outcome {
        SolveOutcome::Feasible(_) => ExitCode::from(0),
        SolveOutcome::Infeasible(_) => ExitCode::from(2),
    })
}

fn print_outcome(outcome: &SolveOutcome) {
    match outcome {
        SolveOutcome::Feasible(s) => {
            println!("feasible, completion time T = {:.9} s", s.completion_time);
            println!(
                "{:>4}  {:>12}  {:>12}  {:>12}  {:>12}",
                "#", "start", "rate", "length", "overflow"
            );
            for (i, ep) in s.epochs.iter().enumerate() {
                println!(
                    "{:>4}  {:>12.6}  {:>12.6}  {:>12.6}  {:>12.6}",
                    i, ep.start, ep.rate, ep.len, ep.overflow_at_end
                );
            }
            if !s.overflows.is_empty() {
                println!("overflows:");
                for (t, o) in &s.overflows {
                    println!("  t = {t:.6}: {o:.6} J lost");
                }
            }
            println!("energy spent: {:.9} J", s.energy_spent);
        }
        SolveOutcome::Infeasible(w) => {
            println!("infeasible");
            println!(
                "  witness: quality event at t = {} needs {:.9} bits, at most {:.9} achievable",
                w.q, w.required, w.achievable
            );
            println!(
                "  detected after {:.6} s with {:.6} bits sent, {:.6} J spent",
                w.elapsed, w.sent_before, w.spent_before
            );
        }
    }
}

fn cmd_validate(scenario: &Path, schedule: &Path, strict: bool) -> Result<ExitCode> {
    let sc = load_scenario(scenario)?;
    let text = std::fs::read_to_string(schedule)
        .with_context(|| format!("cannot read schedule file {}", schedule.display()))?;
    // Accept either a bare schedule or a full solve outcome.
    let sched: ehsched::Schedule = match serde_json::from_str(&text) {
        Ok(s) => s,
        Err(first) => match serde_json::from_str::<SolveOutcome>(&text) {
            Ok(SolveOutcome::Feasible(s)) => s,
            Ok(SolveOutcome::Infeasible(_)) => {
                anyhow::bail!(
                    "schedule file {} holds an infeasible outcome",
                    schedule.display()
                )
            }
            Err(_) => {
                return Err(first)
                    .with_context(|| format!("cannot parse schedule file {}", schedule.display()))
            }
        },
    };
    let report = validate(&sc, &sched);
    print!("{report}");
    let ok = if strict {
        report.all_passed()
    } else {
        report.constraints_passed()
    };
    Ok(ExitCode::from(if ok { 0 } else { 2 }))
}

#[allow(clippy::too_many_arguments)]
fn cmd_oracle(
    path: &Path,
    dt: f64,
    equant: Option<f64>,
    dquant: Option<f64>,
    rgrid: Option<f64>,
    max_slots: usize,
    no_compare: bool,
) -> Result<ExitCode> {
    let sc = load_scenario(path)?;
    let mut cfg = OracleConfig::for_scenario(&sc, dt, 8192);
    if let Some(e) = equant {
        cfg.energy_quantum = e;
    }
    if let Some(d) = dquant {
        cfg.data_quantum = d;
    }
    if let Some(r) = rgrid {
        cfg.max_rate = r;
    }
    cfg.max_slots = max_slots;
    let outcome = dp_min_time(&sc, &cfg).context("oracle run failed")?;
    match outcome {
        OracleOutcome::Feasible { completion_time } => {
            println!("T_oracle = {completion_time:.9} s (dt = {dt}, pessimistic)");
            if !no_compare {
                match scheduler::solve(&sc)? {
                    SolveOutcome::Feasible(s) => {
                        let gap = completion_time - s.completion_time;
                        println!("T_solver = {:.9} s", s.completion_time);
                        println!(
                            "gap      = {gap:.9} s ({:.3}% of T_solver)",
                            100.0 * gap / s.completion_time
                        );
                    }
                    SolveOutcome::Infeasible(w) => {
                        println!("solver disagrees: infeasible at q = {}", w.q);
                    }
                }
            }
            Ok(ExitCode::from(0))
        }
        OracleOutcome::Infeasible => {
            println!("infeasible (no quantized state reaches the data total)");
            Ok(ExitCode::from(2))
        }
    }
}

fn cmd_simulate(
    config: Option<&Path>,
    trials: Option<u32>,
    seed: Option<u64>,
    levels: Option<Vec<f64>>,
    out: &Path,
) -> Result<ExitCode> {
    let mut cfg = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            parse_config(&text).with_context(|| format!("cannot parse {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(l) = levels {
        cfg.energy_levels = l;
    }
    let report = run_experiment(&cfg).context("experiment failed")?;
    for failure in &report.failures {
        eprintln!("trial failure: {failure}");
    }
    write_results(&report.rows, out).context("cannot write results")?;
    println!(
        "wrote {} rows ({} trials per level, seed {}) to {}",
        report.rows.len(),
        cfg.trials,
        cfg.seed,
        out.display()
    );
    if !report.failures.is_empty() {
        anyhow::bail!("{} trial(s) failed", report.failures.len());
    }
    Ok(ExitCode::from(0))
}

/// Experiment config JSON: flat object with optional fields mirroring
/// [`ExperimentConfig`]; `qos` uses the scenario-file QoS schema.
fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: serde_json::Value = serde_json::from_str(text)?;
    let mut cfg = ExperimentConfig::default();
    let obj = raw
        .as_object()
        .ok_or_else(|| anyhow::anyhow!("config must be a JSON object"))?;
    for (key, value) in obj {
        match key.as_str() {
            "trials" => cfg.trials = value.as_u64().context("trials")? as u32,
            "seed" => cfg.seed = value.as_u64().context("seed")?,
            "energy_levels" => {
                cfg.energy_levels =
                    serde_json::from_value(value.clone()).context("energy_levels")?
            }
            "n_data" => cfg.n_data = value.as_u64().context("n_data")? as u32,
            "n_energy" => cfg.n_energy = value.as_u64().context("n_energy")? as u32,
            "horizon" => cfg.horizon = value.as_f64().context("horizon")?,
            "total_data" => cfg.total_data = value.as_f64().context("total_data")?,
            "c_max" => cfg.c_max = value.as_f64().context("c_max")?,
            "qos" => cfg.qos = serde_json::from_value::<QosSpec>(value.clone()).context("qos")?,
            "model" => cfg.model = serde_json::from_value(value.clone()).context("model")?,
            other => anyhow::bail!("unknown config field `{other}`"),
        }
    }
    Ok(cfg)
}
