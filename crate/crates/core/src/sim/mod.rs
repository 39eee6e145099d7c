//! Discrete-event co-simulation of the closed loop:
//! plant → forward link → controller → feedback link → plant.

mod episode;
mod metrics;
mod queue;
mod scenario;
mod sweep;

pub use episode::{run_episode, DirectionCounters, Episode, MessageCounters};
pub use metrics::{compute_metrics, EpisodeMetrics, EpisodeTrace, TraceRecord};
pub use queue::EventQueue;
pub use scenario::ScenarioConfig;
pub use sweep::{
    aggregate_comparison, aggregate_sweep, compare_jobs, compare_scenarios, failure_threshold, run_sweep, sweep_jobs,
    ComparisonReport, Job, ScenarioAggregate, SweepRow,
};
