use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use wiloop_core::params::{self, ParamKind};
use wiloop_core::sim::{failure_threshold, run_episode, ScenarioConfig};

use crate::config::{self, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::{exec, output};

const DEFAULT_OUT: &str = "results";
const DEFAULT_SEEDS: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "wiloop", version, about = "Closed-loop balancing over simulated wireless links")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one episode and write trace.csv and metrics.txt.
    Run {
        config: PathBuf,
        /// Overrides scenario.seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run two or more scenarios over the same seeds and compare them.
    Compare {
        #[arg(long = "scenario", required = true)]
        scenarios: Vec<PathBuf>,
        /// Seeds 1..=K for every scenario.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one numeric parameter and locate the failure threshold.
    Sweep {
        config: PathBuf,
        /// Parameter path such as `scenario.added_delay`.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values with units, e.g. `0ms,2ms,5ms`.
        #[arg(long)]
        values: Option<String>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn seed_list(count: Option<usize>, file: &ExperimentConfig) -> Result<Vec<u64>> {
    let k = count.or(file.seeds).unwrap_or(DEFAULT_SEEDS);
    if k == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    Ok((1..=k as u64).collect())
}

fn out_dir(flag: Option<PathBuf>, file: Option<&ExperimentConfig>) -> PathBuf {
    flag.or_else(|| file.and_then(|f| f.out.clone())).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn human(kind: ParamKind, si: f64) -> String {
    match kind {
        ParamKind::Duration => format!("{} ms", si * 1e3),
        ParamKind::Angle => format!("{} deg", si.to_degrees()),
        ParamKind::Scalar | ParamKind::Integer => si.to_string(),
    }
}

fn cmd_run(config: &Path, seed: Option<u64>, out: Option<PathBuf>, stdout: &mut dyn Write) -> Result<()> {
    let file = config::load(config)?;
    let mut cfg = file.scenario.clone();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let ep = run_episode(&cfg)?;
    let dir = out_dir(out, Some(&file));
    output::run_artifacts(&cfg, &ep).write_to(&dir)?;
    let m = &ep.metrics;
    let status = if m.fell { format!("fell at {:.3} s", m.balanced_duration) } else { "balanced".into() };
    let _ = writeln!(
        stdout,
        "{} seed {}: {status}, rms tilt rate {:.3} deg/s, latency {:.3} ms -> {}",
        cfg.name,
        cfg.seed,
        m.rms_tilt_rate,
        m.latency_mean,
        dir.display()
    );
    Ok(())
}

fn cmd_compare(paths: &[PathBuf], seeds: Option<usize>, out: Option<PathBuf>, stdout: &mut dyn Write) -> Result<()> {
    if paths.len() < 2 {
        return Err(CliError::Usage("compare needs at least two --scenario files".into()));
    }
    if seeds == Some(0) {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let files = paths.iter().map(|p| config::load(p)).collect::<Result<Vec<_>>>()?;
    let seeds = seed_list(seeds, &files[0])?;
    let cfgs: Vec<ScenarioConfig> = files.iter().map(|f| f.scenario.clone()).collect();
    let report = exec::parallel_compare(&cfgs, &seeds)?;
    let artifacts = output::compare_artifacts(&report)?;
    let dir = out_dir(out, None);
    artifacts.write_to(&dir)?;
    for s in &report.scenarios {
        let _ = writeln!(
            stdout,
            "{}: falls {:.0}%, rms tilt rate {:.3} deg/s, latency {:.3} ms (var {:.3} ms²)",
            s.name,
            s.fall_fraction * 100.0,
            s.rms_tilt_rate,
            s.latency_mean,
            s.latency_variance
        );
    }
    let _ = writeln!(stdout, "wrote {}", dir.display());
    Ok(())
}

fn cmd_sweep(
    config: &Path,
    param: Option<String>,
    values: Option<String>,
    seeds: Option<usize>,
    out: Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let file = config::load(config)?;
    let path = param
        .or_else(|| file.sweep.as_ref().map(|s| s.param.clone()))
        .ok_or_else(|| CliError::Usage("no --param given and the config has no [sweep] section".into()))?;
    let def = params::lookup(&path).ok_or_else(|| CliError::Usage(format!("unknown parameter path `{path}`")))?;
    let values = match values {
        Some(list) => config::parse_list(def.kind, &list).map_err(|m| CliError::Usage(format!("--values: {m}")))?,
        None => file
            .sweep
            .as_ref()
            .map(|s| s.values.clone())
            .ok_or_else(|| CliError::Usage("no --values given and the config has no sweep.values".into()))?,
    };
    if values.is_empty() {
        return Err(CliError::Usage("--values is empty".into()));
    }
    let seeds = seed_list(seeds, &file)?;
    let rows = exec::parallel_sweep(&file.scenario, &path, &values, &seeds)?;
    let dir = out_dir(out, Some(&file));
    output::sweep_artifacts(&rows).write_to(&dir)?;
    for r in &rows {
        let _ = writeln!(
            stdout,
            "{path} = {}: rms tilt rate {:.3} ± {:.3} deg/s, falls {:.0}%",
            human(def.kind, r.value),
            r.mean_rms_tilt_rate,
            r.stderr,
            r.fall_fraction * 100.0
        );
    }
    match failure_threshold(&rows) {
        Some(v) => writeln!(stdout, "failure threshold: {}", human(def.kind, v)),
        None => writeln!(stdout, "failure threshold: none in the swept range"),
    }
    .ok();
    Ok(())
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, out, stdout),
        Command::Compare { scenarios, seeds, out } => cmd_compare(&scenarios, seeds, out, stdout),
        Command::Sweep { config, param, values, seeds, out } => cmd_sweep(&config, param, values, seeds, out, stdout),
    }
}
