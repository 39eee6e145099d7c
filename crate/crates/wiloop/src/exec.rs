//! Parallel executors for the core job lists. Episodes share nothing, so
//! each job runs on whichever worker picks it up and results are collected
//! back in job order before aggregation.

use rayon::prelude::*;
use wiloop_core::sim::{
    aggregate_comparison, aggregate_sweep, compare_jobs, run_episode, sweep_jobs, ComparisonReport, Episode, Job,
    ScenarioConfig, SweepRow,
};

use crate::error::Result;

/// Runs every job, returning episodes in job order. On failure the error of
/// the lowest-indexed failing job is reported.
pub fn run_jobs(jobs: &[Job]) -> Result<Vec<Episode>> {
    let results: Vec<_> = jobs.par_iter().map(|j| run_episode(&j.cfg)).collect();
    Ok(results.into_iter().collect::<Result<Vec<_>, _>>()?)
}

pub fn parallel_sweep(base: &ScenarioConfig, path: &str, values: &[f64], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    let jobs = sweep_jobs(base, path, values, seeds)?;
    let metrics: Vec<_> = jobs.par_iter().map(|j| run_episode(&j.cfg).map(|e| e.metrics)).collect();
    let metrics = metrics.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate_sweep(values, &jobs, &metrics))
}

pub fn parallel_compare(cfgs: &[ScenarioConfig], seeds: &[u64]) -> Result<ComparisonReport> {
    let jobs = compare_jobs(cfgs, seeds)?;
    let episodes = run_jobs(&jobs)?;
    Ok(aggregate_comparison(cfgs, &jobs, episodes))
}
