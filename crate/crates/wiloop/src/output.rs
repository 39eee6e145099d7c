//! Result files. Everything is formatted into memory first and written only
//! once all episodes have finished, so a failed run leaves no partial tables.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use wiloop_core::sim::{ComparisonReport, Episode, EpisodeTrace, ScenarioConfig, SweepRow};

use crate::error::{CliError, Result};

pub const TRACE_HEADER: &str =
    "t,tilt,tilt_rate,wheel_rate,command_left,command_right,cycle_latency,forward_dropped,feedback_dropped";

/// Files to create under one output directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    fn add(&mut self, name: impl Into<String>, body: String) {
        self.files.push((name.into(), body));
    }

    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        self.files
            .iter()
            .map(|(name, body)| {
                let path = dir.join(name);
                fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
                Ok(path)
            })
            .collect()
    }
}

fn flag(b: bool) -> u8 {
    u8::from(b)
}

pub fn trace_csv(trace: &EpisodeTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let latency = r.cycle_latency.map(|l| l.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            r.tilt,
            r.tilt_rate,
            r.wheel_rate,
            r.command_left,
            r.command_right,
            latency,
            flag(r.forward_dropped),
            flag(r.feedback_dropped)
        )
        .unwrap();
    }
    out
}

pub fn metrics_txt(cfg: &ScenarioConfig, ep: &Episode) -> String {
    let m = &ep.metrics;
    let c = &ep.counters;
    let mut out = String::new();
    out.push_str("# seconds, degrees, degrees per second, milliseconds\n");
    let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
    kv("scenario", cfg.name.clone());
    kv("seed", cfg.seed.to_string());
    kv("balanced_duration", m.balanced_duration.to_string());
    kv("fell", m.fell.to_string());
    kv("rms_tilt_rate", m.rms_tilt_rate.to_string());
    kv("rms_wheel_rate", m.rms_wheel_rate.to_string());
    kv("max_abs_tilt", m.max_abs_tilt.to_string());
    kv("latency_mean", m.latency_mean.to_string());
    kv("latency_variance", m.latency_variance.to_string());
    kv("latency_p99", m.latency_p99.to_string());
    kv("drop_rate", m.drop_rate.to_string());
    kv("forward_sent", c.forward.sent.to_string());
    kv("forward_delivered", c.forward.delivered.to_string());
    kv("forward_lost", c.forward.lost.to_string());
    kv("feedback_sent", c.feedback.sent.to_string());
    kv("feedback_delivered", c.feedback.delivered.to_string());
    kv("feedback_lost", c.feedback.lost.to_string());
    kv("superseded", c.superseded.to_string());
    kv("causality_violations", c.causality_violations.to_string());
    kv("records", ep.trace.records.len().to_string());
    out
}

pub fn run_artifacts(cfg: &ScenarioConfig, ep: &Episode) -> Artifacts {
    let mut a = Artifacts::default();
    a.add("trace.csv", trace_csv(&ep.trace));
    a.add("metrics.txt", metrics_txt(cfg, ep));
    a
}

/// Keeps letters, digits, `-` and `_`; everything else becomes `_`.
pub fn sanitize(name: &str) -> String {
    let s: String =
        name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    if s.is_empty() {
        "scenario".into()
    } else {
        s
    }
}

pub fn comparison_csv(report: &ComparisonReport) -> String {
    let mut out = String::from(
        "scenario,episodes,fall_fraction,balanced_duration,rms_tilt_rate,rms_tilt_rate_stderr,rms_wheel_rate,\
         max_abs_tilt,latency_mean,latency_variance,latency_p99,drop_rate\n",
    );
    for s in &report.scenarios {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.name,
            s.episodes,
            s.fall_fraction,
            s.balanced_duration,
            s.rms_tilt_rate,
            s.rms_tilt_rate_stderr,
            s.rms_wheel_rate,
            s.max_abs_tilt,
            s.latency_mean,
            s.latency_variance,
            s.latency_p99,
            s.drop_rate
        )
        .unwrap();
    }
    out
}

fn tilt_rate_dat(trace: &EpisodeTrace) -> String {
    let mut out = String::from("# t [s]  tilt_rate [deg/s]\n");
    for r in &trace.records {
        writeln!(out, "{} {}", r.t, r.tilt_rate).unwrap();
    }
    out
}

fn gnuplot_script(names: &[(String, String)]) -> String {
    let mut out = String::from(
        "set terminal pngcairo size 1000,500\nset output 'tilt_rate.png'\n\
         set xlabel 'time [s]'\nset ylabel 'tilt rate [deg/s]'\nset key top right\n",
    );
    let series: Vec<String> = names
        .iter()
        .map(|(file, title)| format!("'{file}' using 1:2 with lines title '{}'", title.replace('\'', "")))
        .collect();
    writeln!(out, "plot {}", series.join(", \\\n     ")).unwrap();
    out
}

pub fn compare_artifacts(report: &ComparisonReport) -> Result<Artifacts> {
    let mut a = Artifacts::default();
    a.add("comparison.csv", comparison_csv(report));
    let mut used = BTreeSet::new();
    let mut plotted = Vec::new();
    for (s, trace) in report.scenarios.iter().zip(&report.traces) {
        let file = format!("{}_tilt_rate.dat", sanitize(&s.name));
        if !used.insert(file.clone()) {
            return Err(CliError::Usage(format!(
                "two scenarios map to the same output file `{file}`; give them distinct names"
            )));
        }
        a.add(file.clone(), tilt_rate_dat(trace));
        plotted.push((file, s.name.clone()));
    }
    a.add("plot.gp", gnuplot_script(&plotted));
    Ok(a)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("value,mean_rms_tilt_rate,fall_fraction,stderr\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.value, r.mean_rms_tilt_rate, r.fall_fraction, r.stderr).unwrap();
    }
    out
}

pub fn sweep_artifacts(rows: &[SweepRow]) -> Artifacts {
    let mut a = Artifacts::default();
    a.add("sweep.csv", sweep_csv(rows));
    a
}
