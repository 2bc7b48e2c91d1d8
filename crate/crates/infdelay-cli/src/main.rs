//! Command-line front end.
//!
//! Reads JSON system descriptions, runs the library's simulation and
//! analysis routines, and prints deterministic CSV or JSON reports.
//! Exit codes: 0 success, 1 runtime or verification failure, 2 malformed
//! input (bad flags, unreadable files, invalid descriptions).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use serde::Deserialize;

use infdelay::analysis::{
    classify, decay_profile, kernel_identify, lplq_gain, system_blackbox, AnalysisError,
};
use infdelay::checks;
use infdelay::phase::PhaseVector;
use infdelay::registry;
use infdelay::report;
use infdelay::solver::solve;
use infdelay::spec;
use infdelay::system::KernelSystem;

#[derive(Parser)]
#[command(
    name = "infdelay",
    version,
    about = "Simulation and empirical stability analysis for linear difference \
             systems with unbounded delay"
)]
struct Cli {
    /// Seed for randomized probing (gain estimation, classification).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a system forward and print the trajectory as CSV.
    Simulate {
        /// Path to a JSON system description.
        spec: PathBuf,
        /// Start time of the run.
        #[arg(long, default_value_t = 0)]
        tau: u64,
        /// Final time to compute.
        #[arg(long)]
        n_end: u64,
        /// Apply a unit impulse forcing at this time (first coordinate).
        #[arg(long, conflicts_with = "forcing_json")]
        impulse: Option<u64>,
        /// Path to a JSON array of forcing values `f(tau), f(tau+1), ...`,
        /// each a length-`dimension` array.
        #[arg(long)]
        forcing_json: Option<PathBuf>,
        /// Path to a JSON array of initial-history coordinates:
        /// `[{"depth": j, "value": [...]}, ...]` (depth 0 is the state at
        /// the start time).
        #[arg(long)]
        phi_json: Option<PathBuf>,
    },
    /// Estimate the (p,q) input-to-state gain over a window.
    Gain {
        /// Path to a JSON system description.
        spec: PathBuf,
        /// Input sequence exponent (a number >= 1, or "inf").
        #[arg(long, value_parser = parse_exponent, default_value = "1")]
        p: f64,
        /// Output sequence exponent (a number >= 1, or "inf"; must be >= p).
        #[arg(long, value_parser = parse_exponent, default_value = "inf")]
        q: f64,
        /// Time window the gain is measured over.
        #[arg(long, default_value_t = 160)]
        horizon: u64,
    },
    /// Measure the weighted decay profile over a start window.
    Profile {
        /// Path to a JSON system description.
        spec: PathBuf,
        /// Weight exponent of the probe norm.
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        /// Number of start times.
        #[arg(long, default_value_t = 160)]
        n_starts: u64,
        /// Largest probe depth (default: half the start window).
        #[arg(long)]
        probe_depth: Option<u64>,
        /// Print the profile as JSON instead of CSV.
        #[arg(long)]
        json: bool,
    },
    /// Run the combined stability classification and print a JSON report.
    Classify {
        /// Path to a JSON system description.
        spec: PathBuf,
        /// Weight exponent the classification runs at.
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        /// Input sequence exponent (a number >= 1, or "inf").
        #[arg(long, value_parser = parse_exponent, default_value = "inf")]
        p: f64,
        /// Output sequence exponent (a number >= 1, or "inf"; must be >= p).
        #[arg(long, value_parser = parse_exponent, default_value = "inf")]
        q: f64,
        /// Number of start times (also the gain window).
        #[arg(long, default_value_t = 160)]
        n_starts: u64,
        /// Largest probe depth (default: half the start window).
        #[arg(long)]
        probe_depth: Option<u64>,
    },
    /// Recover the kernel band from trajectory access alone.
    Identify {
        /// Path to a JSON system description.
        spec: PathBuf,
        /// Anchor time: entries `L(n0+k, k)` are recovered.
        #[arg(long, default_value_t = 1)]
        n0: u64,
        /// Largest recovered depth.
        #[arg(long, default_value_t = 8)]
        k_max: u64,
        /// Also measure the uniform gain over this window and check each
        /// recovered coefficient against its envelope.
        #[arg(long)]
        gain_horizon: Option<u64>,
    },
    /// Run the built-in verification suite.
    Verify {
        /// Print results as JSON instead of text lines.
        #[arg(long)]
        json: bool,
    },
    /// List the built-in example systems.
    Examples,
}

fn parse_exponent(s: &str) -> Result<f64, String> {
    let v = match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" => f64::INFINITY,
        other => other
            .parse::<f64>()
            .map_err(|_| format!("expected a number >= 1 or 'inf', got '{s}'"))?,
    };
    if v >= 1.0 {
        Ok(v)
    } else {
        Err(format!("exponent must be >= 1, got '{s}'"))
    }
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    fn run(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    fn from_analysis(e: AnalysisError) -> Self {
        match e {
            AnalysisError::BadExponents { .. } | AnalysisError::BadParameter(_) => {
                CliError::input(e.to_string())
            }
            other => CliError::run(other.to_string()),
        }
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn load_system(path: &Path) -> Result<KernelSystem, CliError> {
    spec::load(&read_input(path)?).map_err(|e| CliError::input(e.to_string()))
}

#[derive(Deserialize)]
struct PhiCoord {
    depth: u64,
    value: Vec<f64>,
}

fn load_phi(path: Option<&PathBuf>, dim: usize) -> Result<PhaseVector, CliError> {
    let Some(path) = path else {
        return Ok(PhaseVector::zero(dim));
    };
    let coords: Vec<PhiCoord> = serde_json::from_str(&read_input(path)?)
        .map_err(|e| CliError::input(format!("bad initial history: {e}")))?;
    let mut phi = PhaseVector::zero(dim);
    for c in coords {
        if c.value.len() != dim {
            return Err(CliError::input(format!(
                "initial-history value at depth {} has length {}, expected {dim}",
                c.depth,
                c.value.len()
            )));
        }
        phi.set_coord(c.depth, DVector::from_vec(c.value))
            .map_err(|e| CliError::input(e.to_string()))?;
    }
    Ok(phi)
}

fn load_forcing(
    dim: usize,
    tau: u64,
    n_end: u64,
    impulse: Option<u64>,
    forcing_json: Option<&PathBuf>,
) -> Result<Vec<DVector<f64>>, CliError> {
    if let Some(t) = impulse {
        if t < tau || t >= n_end {
            return Err(CliError::input(format!(
                "impulse time {t} must lie in [{tau}, {n_end})"
            )));
        }
        let mut f = vec![DVector::zeros(dim); (n_end - tau) as usize];
        f[(t - tau) as usize][0] = 1.0;
        return Ok(f);
    }
    let Some(path) = forcing_json else {
        return Ok(Vec::new());
    };
    let rows: Vec<Vec<f64>> = serde_json::from_str(&read_input(path)?)
        .map_err(|e| CliError::input(format!("bad forcing: {e}")))?;
    rows.into_iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != dim {
                Err(CliError::input(format!(
                    "forcing value {i} has length {}, expected {dim}",
                    row.len()
                )))
            } else {
                Ok(DVector::from_vec(row))
            }
        })
        .collect()
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Simulate { spec, tau, n_end, impulse, forcing_json, phi_json } => {
            let sys = load_system(&spec)?;
            if n_end < tau {
                return Err(CliError::input(format!(
                    "final time {n_end} precedes start time {tau}"
                )));
            }
            let phi = load_phi(phi_json.as_ref(), sys.dim())?;
            let forcing = load_forcing(sys.dim(), tau, n_end, impulse, forcing_json.as_ref())?;
            let traj = solve(&sys, tau, &phi, &forcing, n_end)
                .map_err(|e| CliError::run(e.to_string()))?;
            print!("{}", report::trajectory_csv(&traj));
            Ok(0)
        }
        Command::Gain { spec, p, q, horizon } => {
            let sys = load_system(&spec)?;
            let estimate =
                lplq_gain(&sys, p, q, horizon, cli.seed).map_err(CliError::from_analysis)?;
            println!("{}", report::to_json(&estimate));
            Ok(0)
        }
        Command::Profile { spec, gamma, n_starts, probe_depth, json } => {
            let sys = load_system(&spec)?;
            let depth = probe_depth.unwrap_or(n_starts / 2);
            let profile =
                decay_profile(&sys, gamma, n_starts, depth).map_err(CliError::from_analysis)?;
            if json {
                println!("{}", report::to_json(&profile));
            } else {
                print!("{}", report::profile_csv(&profile));
            }
            Ok(0)
        }
        Command::Classify { spec, gamma, p, q, n_starts, probe_depth } => {
            let sys = load_system(&spec)?;
            let depth = probe_depth.unwrap_or(n_starts / 2);
            let report_doc = classify(&sys, gamma, p, q, n_starts, depth, cli.seed)
                .map_err(CliError::from_analysis)?;
            println!("{}", report::to_json(&report_doc));
            Ok(0)
        }
        Command::Identify { spec, n0, k_max, gain_horizon } => {
            let sys = load_system(&spec)?;
            if n0 == 0 {
                return Err(CliError::input("the anchor time must be at least 1"));
            }
            let hint = match gain_horizon {
                None => None,
                Some(h) => Some(
                    lplq_gain(&sys, f64::INFINITY, f64::INFINITY, h, cli.seed)
                        .map_err(CliError::from_analysis)?
                        .value,
                ),
            };
            let ident = kernel_identify(system_blackbox(&sys), sys.dim(), n0, k_max, hint)
                .map_err(CliError::from_analysis)?;
            println!("{}", report::to_json(&ident.to_report()));
            Ok(0)
        }
        Command::Verify { json } => {
            let results = checks::run_all();
            let failed = results.iter().filter(|r| !r.passed).count();
            if json {
                println!("{}", report::to_json(&results));
            } else {
                for r in &results {
                    println!(
                        "{}: {} - {} ({:.1}s)",
                        r.name,
                        if r.passed { "PASS" } else { "FAIL" },
                        r.detail,
                        r.seconds
                    );
                }
                println!("{}/{} checks passed", results.len() - failed, results.len());
            }
            Ok(if failed == 0 { 0 } else { 1 })
        }
        Command::Examples => {
            for entry in registry::entries() {
                println!("{} - {}", entry.name, entry.summary);
                if !entry.params.is_empty() {
                    println!("  parameters:");
                    for (key, doc) in entry.params {
                        println!("    {key}: {doc}");
                    }
                }
                println!("  expected findings:");
                for line in entry.expected {
                    println!("    - {line}");
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("INFDELAY_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
