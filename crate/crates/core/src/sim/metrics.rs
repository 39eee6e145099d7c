use alloc::vec::Vec;

use crate::stats::NanosStats;
use crate::{Error, Nanos, Result};

/// One completed control cycle. Angles in degrees, latency in ms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// Sample time, s.
    pub t: f64,
    pub tilt: f64,
    pub tilt_rate: f64,
    pub wheel_rate: f64,
    pub command_left: f64,
    pub command_right: f64,
    /// `None` when either frame of the cycle was lost.
    pub cycle_latency: Option<f64>,
    pub forward_dropped: bool,
    pub feedback_dropped: bool,
}

impl TraceRecord {
    pub fn dropped(&self) -> bool {
        self.forward_dropped || self.feedback_dropped
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub records: Vec<TraceRecord>,
    /// s
    pub episode_duration: f64,
    /// Time of the first fall-threshold crossing, s.
    pub fall_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    /// s
    pub balanced_duration: f64,
    pub fell: bool,
    /// deg/s
    pub rms_tilt_rate: f64,
    /// deg/s, wheel rotation (the other reading of "rate of rotation").
    pub rms_wheel_rate: f64,
    /// deg
    pub max_abs_tilt: f64,
    /// ms; NaN when no cycle completed without loss.
    pub latency_mean: f64,
    /// ms²
    pub latency_variance: f64,
    /// ms
    pub latency_p99: f64,
    pub drop_rate: f64,
}

impl EpisodeMetrics {
    /// Metrics for a trace with no records, e.g. a fall at t = 0.
    pub fn without_records(trace: &EpisodeTrace) -> Self {
        EpisodeMetrics {
            balanced_duration: trace.fall_time.unwrap_or(trace.episode_duration),
            fell: trace.fall_time.is_some(),
            rms_tilt_rate: f64::NAN,
            rms_wheel_rate: f64::NAN,
            max_abs_tilt: f64::NAN,
            latency_mean: f64::NAN,
            latency_variance: f64::NAN,
            latency_p99: f64::NAN,
            drop_rate: f64::NAN,
        }
    }
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    libm::sqrt(sum / n as f64)
}

/// Aggregates a trace. Rate statistics cover the balanced portion only.
pub fn compute_metrics(trace: &EpisodeTrace) -> Result<EpisodeMetrics> {
    if trace.records.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let balanced_duration = trace.fall_time.unwrap_or(trace.episode_duration);
    let balanced: Vec<&TraceRecord> = trace.records.iter().filter(|r| r.t <= balanced_duration).collect();
    let portion: &[&TraceRecord] = if balanced.is_empty() { &[] } else { &balanced };

    // latencies are whole nanoseconds; summarize them exactly
    let latencies: NanosStats =
        trace.records.iter().filter_map(|r| r.cycle_latency).map(|ms| Nanos(libm::round(ms * 1e6) as u64)).collect();
    let lat = latencies.summary();
    let dropped = trace.records.iter().filter(|r| r.dropped()).count();

    Ok(EpisodeMetrics {
        balanced_duration,
        fell: trace.fall_time.is_some(),
        rms_tilt_rate: rms(portion.iter().map(|r| r.tilt_rate)),
        rms_wheel_rate: rms(portion.iter().map(|r| r.wheel_rate)),
        max_abs_tilt: portion.iter().map(|r| r.tilt.abs()).fold(0.0, f64::max),
        latency_mean: lat.map_or(f64::NAN, |s| s.mean * 1e-6),
        latency_variance: lat.map_or(f64::NAN, |s| s.variance * 1e-12),
        latency_p99: lat.map_or(f64::NAN, |s| s.p99.as_millis_f64()),
        drop_rate: dropped as f64 / trace.records.len() as f64,
    })
}
