//! Parameter sweeps and scenario comparisons.
//!
//! Both are split into a job list and an aggregation step so that any
//! executor (sequential here, a thread pool elsewhere) produces identical
//! tables: jobs are independent and results are merged by job index.

use alloc::string::String;
use alloc::vec::Vec;

use super::episode::{run_episode, Episode};
use super::metrics::{EpisodeMetrics, EpisodeTrace};
use super::scenario::ScenarioConfig;
use crate::params;
use crate::{Error, Result};

/// One episode to run: `point` indexes the swept value or the scenario.
#[derive(Debug, Clone)]
pub struct Job {
    pub point: usize,
    pub seed: u64,
    pub cfg: ScenarioConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    /// SI units (s for durations, rad for angles).
    pub value: f64,
    pub mean_rms_tilt_rate: f64,
    pub fall_fraction: f64,
    /// Standard error of `mean_rms_tilt_rate`.
    pub stderr: f64,
    pub episodes: usize,
}

const MIN_SWEEP_SEEDS: usize = 3;

pub fn sweep_jobs(base: &ScenarioConfig, path: &str, values: &[f64], seeds: &[u64]) -> Result<Vec<Job>> {
    if params::lookup(path).is_none() {
        return Err(Error::UnknownParameter(String::from(path)));
    }
    if values.is_empty() {
        return Err(Error::invalid_argument("sweep needs at least one value"));
    }
    if seeds.len() < MIN_SWEEP_SEEDS {
        return Err(Error::invalid_argument(alloc::format!(
            "sweep needs at least {MIN_SWEEP_SEEDS} seeds per point, got {}",
            seeds.len()
        )));
    }
    let mut jobs = Vec::with_capacity(values.len() * seeds.len());
    for (point, &value) in values.iter().enumerate() {
        let mut cfg = base.clone();
        params::set_param(&mut cfg, path, value)?;
        cfg.validate()?;
        for &seed in seeds {
            jobs.push(Job { point, seed, cfg: ScenarioConfig { seed, ..cfg.clone() } });
        }
    }
    Ok(jobs)
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let finite: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    let n = finite.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = finite.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = finite.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, libm::sqrt(var / n as f64))
}

// Job indices ordered by (point, seed), so sums do not depend on the order
// results were produced or listed in.
fn canonical_order(jobs: &[Job]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..jobs.len()).collect();
    idx.sort_by_key(|&i| (jobs[i].point, jobs[i].seed));
    idx
}

/// Builds the sweep table from per-job metrics (`metrics[i]` belongs to
/// `jobs[i]`).
pub fn aggregate_sweep(values: &[f64], jobs: &[Job], metrics: &[EpisodeMetrics]) -> Vec<SweepRow> {
    assert_eq!(jobs.len(), metrics.len(), "one result per job");
    let order = canonical_order(jobs);
    values
        .iter()
        .enumerate()
        .map(|(point, &value)| {
            let at: Vec<&EpisodeMetrics> =
                order.iter().filter(|&&i| jobs[i].point == point).map(|&i| &metrics[i]).collect();
            let rates: Vec<f64> = at.iter().map(|m| m.rms_tilt_rate).collect();
            let (mean, stderr) = mean_and_stderr(&rates);
            let falls = at.iter().filter(|m| m.fell).count();
            SweepRow {
                value,
                mean_rms_tilt_rate: mean,
                fall_fraction: falls as f64 / at.len().max(1) as f64,
                stderr,
                episodes: at.len(),
            }
        })
        .collect()
}

/// Sequential sweep over `values` of the numeric parameter at `path`.
pub fn run_sweep(base: &ScenarioConfig, path: &str, values: &[f64], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    let jobs = sweep_jobs(base, path, values, seeds)?;
    let metrics = jobs.iter().map(|j| run_episode(&j.cfg).map(|e| e.metrics)).collect::<Result<Vec<_>>>()?;
    Ok(aggregate_sweep(values, &jobs, &metrics))
}

/// Smallest swept value whose fall fraction reaches one half.
pub fn failure_threshold(rows: &[SweepRow]) -> Option<f64> {
    rows.iter()
        .filter(|r| r.fall_fraction >= 0.5)
        .map(|r| r.value)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
}

/// Seed-averaged metrics of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioAggregate {
    pub name: String,
    pub episodes: usize,
    pub fall_fraction: f64,
    pub balanced_duration: f64,
    pub rms_tilt_rate: f64,
    pub rms_tilt_rate_stderr: f64,
    pub rms_wheel_rate: f64,
    pub max_abs_tilt: f64,
    pub latency_mean: f64,
    pub latency_variance: f64,
    pub latency_p99: f64,
    pub drop_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub scenarios: Vec<ScenarioAggregate>,
    /// Trace of the first seed of each scenario, for side-by-side plots.
    pub traces: Vec<EpisodeTrace>,
}

pub fn compare_jobs(cfgs: &[ScenarioConfig], seeds: &[u64]) -> Result<Vec<Job>> {
    if cfgs.len() < 2 {
        return Err(Error::invalid_argument("comparison needs at least two scenarios"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid_argument("comparison needs at least one seed"));
    }
    let mut jobs = Vec::with_capacity(cfgs.len() * seeds.len());
    for (point, cfg) in cfgs.iter().enumerate() {
        cfg.validate()?;
        for &seed in seeds {
            jobs.push(Job { point, seed, cfg: ScenarioConfig { seed, ..cfg.clone() } });
        }
    }
    Ok(jobs)
}

fn mean_of(ms: &[&EpisodeMetrics], f: impl Fn(&EpisodeMetrics) -> f64) -> f64 {
    mean_and_stderr(&ms.iter().map(|m| f(m)).collect::<Vec<_>>()).0
}

/// Averages per-job episodes (`episodes[i]` belongs to `jobs[i]`) into a
/// report. Each scenario's plot trace comes from its lowest seed.
pub fn aggregate_comparison(cfgs: &[ScenarioConfig], jobs: &[Job], episodes: Vec<Episode>) -> ComparisonReport {
    assert_eq!(jobs.len(), episodes.len(), "one result per job");
    let mut traces: Vec<Option<EpisodeTrace>> = alloc::vec![None; cfgs.len()];
    let mut metrics: Vec<Vec<EpisodeMetrics>> = alloc::vec![Vec::new(); cfgs.len()];
    let mut episodes: Vec<Option<Episode>> = episodes.into_iter().map(Some).collect();
    for i in canonical_order(jobs) {
        let point = jobs[i].point;
        let ep = episodes[i].take().expect("each job visited once");
        metrics[point].push(ep.metrics);
        if traces[point].is_none() {
            traces[point] = Some(ep.trace);
        }
    }
    let scenarios = cfgs
        .iter()
        .zip(&metrics)
        .map(|(cfg, ms)| {
            let refs: Vec<&EpisodeMetrics> = ms.iter().collect();
            let rates: Vec<f64> = ms.iter().map(|m| m.rms_tilt_rate).collect();
            let (rms, rms_se) = mean_and_stderr(&rates);
            ScenarioAggregate {
                name: cfg.name.clone(),
                episodes: ms.len(),
                fall_fraction: ms.iter().filter(|m| m.fell).count() as f64 / ms.len().max(1) as f64,
                balanced_duration: mean_of(&refs, |m| m.balanced_duration),
                rms_tilt_rate: rms,
                rms_tilt_rate_stderr: rms_se,
                rms_wheel_rate: mean_of(&refs, |m| m.rms_wheel_rate),
                max_abs_tilt: mean_of(&refs, |m| m.max_abs_tilt),
                latency_mean: mean_of(&refs, |m| m.latency_mean),
                latency_variance: mean_of(&refs, |m| m.latency_variance),
                latency_p99: mean_of(&refs, |m| m.latency_p99),
                drop_rate: mean_of(&refs, |m| m.drop_rate),
            }
        })
        .collect();
    ComparisonReport { scenarios, traces: traces.into_iter().map(Option::unwrap_or_default).collect() }
}

/// Sequential comparison of `cfgs`, each run once per seed.
pub fn compare_scenarios(cfgs: &[ScenarioConfig], seeds: &[u64]) -> Result<ComparisonReport> {
    let jobs = compare_jobs(cfgs, seeds)?;
    let episodes = jobs.iter().map(|j| run_episode(&j.cfg)).collect::<Result<Vec<_>>>()?;
    Ok(aggregate_comparison(cfgs, &jobs, episodes))
}
