use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cournot_awe::config::{self, sha256_hex, LoadError};
use cournot_awe::engine::{run_sweep, SweepMedians};
use cournot_awe::metrics::Recovery;
use cournot_awe::output::{to_json_bytes, write_atomic, write_diagnostics_csv, write_series_csv, write_steps_csv};
use cournot_awe::{presets, run_simulation, summarize, SimConfig, SimSummary, Trace};

/// Environment variable capping the default number of sweep jobs.
const JOBS_ENV: &str = "COURNOT_AWE_JOBS";

#[derive(Parser)]
#[command(name = "cournot-awe", version, about = "Repeated Cournot games played by bandit agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run {
        #[command(flatten)]
        source: Source,
        /// Master seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Also write every step to steps.csv.
        #[arg(long)]
        full_log: bool,
        /// Write agent 0's epsilon, alpha and sigma to diagnostics.csv.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Run the same config over several seeds.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Seeds as `a..b` (inclusive) or a comma-separated list.
        #[arg(long)]
        seeds: String,
        /// Worker threads; defaults to the core count, capped by COURNOT_AWE_JOBS.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// List the built-in presets.
    Presets,
}

#[derive(Args)]
struct Source {
    /// TOML config file.
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset such as `duopoly` or `fifty-firm-pattern3`.
    #[arg(long)]
    preset: Option<String>,
    /// Horizon override.
    #[arg(long)]
    steps: Option<usize>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

#[derive(Serialize)]
struct ConfigRef {
    path: Option<PathBuf>,
    preset: Option<String>,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ConfigRef,
    out_dir: &'a Path,
    seeds: Vec<u64>,
    files: Vec<String>,
    started_unix: f64,
    finished_unix: f64,
}

#[derive(Serialize)]
struct SeedOutcome {
    seed: u64,
    ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    band_occupancy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_collusive_regret: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fairness_spread: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    recovery_times: Option<Vec<Recovery>>,
}

#[derive(Serialize)]
struct Aggregate<'a> {
    config: &'a ConfigRef,
    seeds: &'a [u64],
    succeeded: usize,
    failed: usize,
    medians: &'a SweepMedians,
    runs: Vec<SeedOutcome>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { source, seed, out_dir, full_log, diagnostics } => {
            cmd_run(&source, seed, &out_dir, full_log, diagnostics)
        }
        Command::Sweep { source, seeds, jobs, out_dir } => cmd_sweep(&source, &seeds, jobs, &out_dir),
        Command::Presets => cmd_presets(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn resolve(source: &Source) -> Result<(SimConfig, ConfigRef), Failure> {
    let (mut sim, cref) = match (&source.config, &source.preset) {
        (Some(path), _) => {
            let loaded = config::load(path).map_err(|e| match e {
                LoadError::Io(_) => Failure::Runtime(format!("{}: {e}", path.display())),
                LoadError::Config(_) => Failure::Config(format!("{}: {e}", path.display())),
            })?;
            let cref = ConfigRef { path: Some(path.clone()), preset: None, sha256: loaded.sha256 };
            (loaded.sim, cref)
        }
        (None, Some(name)) => {
            let sim = presets::preset(name).ok_or_else(|| {
                Failure::Config(format!("unknown preset {name:?}; see `cournot-awe presets`"))
            })?;
            let json = serde_json::to_vec(&sim).map_err(|e| Failure::Runtime(e.to_string()))?;
            (sim, ConfigRef { path: None, preset: Some(name.clone()), sha256: sha256_hex(&json) })
        }
        (None, None) => return Err(Failure::Config("give a config file or --preset".into())),
    };
    if let Some(steps) = source.steps {
        sim.steps = steps;
    }
    sim.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok((sim, cref))
}

fn write_csv(path: &Path, f: impl FnOnce(&mut BufWriter<&mut Vec<u8>>) -> io::Result<()>) -> io::Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = BufWriter::new(&mut buf);
        f(&mut w)?;
        w.flush()?;
    }
    write_atomic(path, &buf)
}

/// Writes the artifacts of one run into `dir`, returning the file names.
fn write_run(dir: &Path, trace: &Trace, summary: &SimSummary) -> io::Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut files = vec!["series.csv".to_owned(), "summary.json".to_owned()];
    write_csv(&dir.join("series.csv"), |w| write_series_csv(trace, w))?;
    write_atomic(&dir.join("summary.json"), &to_json_bytes(summary)?)?;
    if let Some(steps) = &trace.steps {
        write_csv(&dir.join("steps.csv"), |w| write_steps_csv(steps, trace.config.market.n(), w))?;
        files.push("steps.csv".to_owned());
    }
    if trace.config.diagnostics {
        write_csv(&dir.join("diagnostics.csv"), |w| write_diagnostics_csv(&trace.diagnostics, w))?;
        files.push("diagnostics.csv".to_owned());
    }
    Ok(files)
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> io::Result<()> {
    write_atomic(&dir.join("manifest.json"), &to_json_bytes(manifest)?)
}

fn cmd_run(source: &Source, seed: Option<u64>, out_dir: &Path, full_log: bool, diagnostics: bool) -> Result<(), Failure> {
    let started = now_unix();
    let (mut sim, cref) = resolve(source)?;
    if let Some(seed) = seed {
        sim.seed = seed;
    }
    sim.full_log |= full_log;
    sim.diagnostics |= diagnostics;
    let trace = run_simulation(&sim).map_err(|e| Failure::Runtime(e.to_string()))?;
    let summary = summarize(&trace);
    let mut files = write_run(out_dir, &trace, &summary)?;
    files.push("manifest.json".to_owned());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: &cref,
        out_dir,
        seeds: vec![sim.seed],
        files,
        started_unix: started,
        finished_unix: now_unix(),
    };
    write_manifest(out_dir, &manifest)?;
    println!(
        "seed {}: band_occupancy={:.3} final_collusive_regret={:.1} fairness_spread={:.3} -> {}",
        sim.seed,
        summary.band_occupancy,
        summary.final_collusive_regret,
        summary.fairness_spread,
        out_dir.display()
    );
    Ok(())
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>, String> {
    let spec = spec.trim();
    let num = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("bad seed {s:?}: {e}"));
    let seeds: Vec<u64> = match spec.split_once("..") {
        Some((a, b)) => (num(a)?..=num(b)?).collect(),
        None if spec.is_empty() => Vec::new(),
        None => spec.split(',').map(num).collect::<Result<_, _>>()?,
    };
    if seeds.is_empty() {
        return Err(format!("--seeds {spec:?} selects no seeds"));
    }
    Ok(seeds)
}

fn default_jobs() -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(JOBS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(cap) if cap >= 1 => cores.min(cap),
        _ => cores,
    }
}

fn cmd_sweep(source: &Source, seeds: &str, jobs: Option<usize>, out_dir: &Path) -> Result<(), Failure> {
    let started = now_unix();
    let seeds = parse_seeds(seeds).map_err(Failure::Config)?;
    if jobs == Some(0) {
        return Err(Failure::Config("--jobs must be >= 1".into()));
    }
    let (sim, cref) = resolve(source)?;
    let sweep = run_sweep(&sim, &seeds, jobs.unwrap_or_else(default_jobs)).map_err(|e| Failure::Config(e.to_string()))?;

    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut runs = Vec::new();
    for run in &sweep.runs {
        let outcome = match &run.result {
            Ok((trace, summary)) => {
                let name = format!("seed-{}", run.seed);
                let dir = out_dir.join(&name);
                let mut written = write_run(&dir, trace, summary)?;
                written.push("manifest.json".to_owned());
                let manifest = Manifest {
                    tool: env!("CARGO_PKG_NAME"),
                    version: env!("CARGO_PKG_VERSION"),
                    config: &cref,
                    out_dir: &dir,
                    seeds: vec![run.seed],
                    files: written.clone(),
                    started_unix: started,
                    finished_unix: now_unix(),
                };
                write_manifest(&dir, &manifest)?;
                files.extend(written.iter().map(|f| format!("{name}/{f}")));
                SeedOutcome {
                    seed: run.seed,
                    ok: true,
                    error: None,
                    band_occupancy: Some(summary.band_occupancy),
                    final_collusive_regret: Some(summary.final_collusive_regret),
                    fairness_spread: Some(summary.fairness_spread),
                    recovery_times: Some(summary.recovery_times.clone()),
                }
            }
            Err(e) => {
                eprintln!("seed {} failed: {e}", run.seed);
                SeedOutcome {
                    seed: run.seed,
                    ok: false,
                    error: Some(e.clone()),
                    band_occupancy: None,
                    final_collusive_regret: None,
                    fairness_spread: None,
                    recovery_times: None,
                }
            }
        };
        runs.push(outcome);
    }
    let succeeded = sweep.succeeded();
    let aggregate = Aggregate {
        config: &cref,
        seeds: &seeds,
        succeeded,
        failed: seeds.len() - succeeded,
        medians: &sweep.medians,
        runs,
    };
    write_atomic(&out_dir.join("aggregate.json"), &to_json_bytes(&aggregate)?)?;
    files.push("aggregate.json".to_owned());
    files.push("manifest.json".to_owned());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: &cref,
        out_dir,
        seeds: seeds.clone(),
        files,
        started_unix: started,
        finished_unix: now_unix(),
    };
    write_manifest(out_dir, &manifest)?;
    println!("{succeeded}/{} seeds succeeded -> {}", seeds.len(), out_dir.display());
    if succeeded == 0 {
        return Err(Failure::Runtime("every seed failed".into()));
    }
    Ok(())
}

fn cmd_presets() -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    for p in presets::market_presets() {
        writeln!(out, "{}", presets::describe(&p))?;
    }
    let patterns: Vec<&str> = cournot_awe::DemandPattern::ALL.iter().map(|p| p.name()).collect();
    writeln!(out, "\nAppend -<pattern> to pick demand ({}); a bare name uses pattern1.", patterns.join(", "))?;
    Ok(())
}
