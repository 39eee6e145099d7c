//! Experiment files.
//!
//! A flat, sectioned text format:
//!
//! ```text
//! # comment
//! [scenario]
//! name = gallop_default
//! initial_tilt = 2 deg
//! episode_duration = 60 s
//!
//! [mac]
//! variant = gallop
//! slot_duration = 1 ms
//! ```
//!
//! Every key is `section.key` in the parameter registry, plus a few
//! structured keys (`scenario.name`, `scenario.control_cycle = auto`,
//! `mac.variant`, repeatable `mac.slot`, `channel.per_channel_loss`) and the
//! `[sweep]` and `[experiment]` sections. Durations need a unit (`s`, `ms`,
//! `us`, `ns`) and angles need `deg` or `rad`. Unknown sections and keys,
//! duplicate keys and malformed values are rejected with the line number.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use wiloop_core::params::{self, ParamKind};
use wiloop_core::sim::ScenarioConfig;
use wiloop_core::wireless::{ChannelId, Direction, MacVariant, SlotSpec};
use wiloop_core::Nanos;

use crate::error::{CliError, Result};

const SECTIONS: [&str; 8] = ["scenario", "plant", "noise", "gains", "mac", "channel", "sweep", "experiment"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    /// SI units.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub path: PathBuf,
    pub scenario: ScenarioConfig,
    pub sweep: Option<SweepSpec>,
    pub seeds: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, path)
}

/// Parses a quantity of the given kind into SI units.
pub fn parse_quantity(kind: ParamKind, text: &str) -> std::result::Result<f64, String> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(_, c)| c.is_alphabetic() && c != 'e' && c != 'E' || c == 'µ')
        .map_or(text.len(), |(i, _)| i);
    // "inf"/"nan" would otherwise be read as units
    let (number, unit) =
        if text[..split].trim().is_empty() { (text, "") } else { (&text[..split], text[split..].trim()) };
    let value: f64 = number.trim().parse().map_err(|_| format!("`{text}` is not a number"))?;
    let scale = match (kind, unit) {
        (ParamKind::Duration, "s") => 1.0,
        (ParamKind::Duration, "ms") => 1e-3,
        (ParamKind::Duration, "us" | "µs") => 1e-6,
        (ParamKind::Duration, "ns") => 1e-9,
        (ParamKind::Duration, "") => return Err(format!("duration `{text}` needs a unit (s, ms, us, ns)")),
        (ParamKind::Angle, "rad") => 1.0,
        (ParamKind::Angle, "deg") => std::f64::consts::PI / 180.0,
        (ParamKind::Angle, "") => return Err(format!("angle `{text}` needs a unit (deg, rad)")),
        (ParamKind::Scalar | ParamKind::Integer, "") => 1.0,
        (_, u) => return Err(format!("unit `{u}` does not fit this value")),
    };
    if !value.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    Ok(value * scale)
}

/// Parses a comma-separated list of quantities.
pub fn parse_list(kind: ParamKind, text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_quantity(kind, s)).collect()
}

fn parse_duration(text: &str) -> std::result::Result<Nanos, String> {
    let secs = parse_quantity(ParamKind::Duration, text)?;
    Nanos::from_secs_f64(secs).ok_or_else(|| format!("duration `{}` out of range", text.trim()))
}

fn parse_slot(text: &str) -> std::result::Result<SlotSpec, String> {
    let usage = "expected `slot = <forward|feedback> <start> <duration> <band> [retransmission]`, e.g. `slot = forward 0ms 1ms 0`";
    let parts: Vec<&str> = text.split_whitespace().collect();
    let (dir, start, duration, band, retx) = match parts.as_slice() {
        [d, s, l, b] => (d, s, l, b, false),
        [d, s, l, b, "retransmission"] => (d, s, l, b, true),
        _ => return Err(usage.to_string()),
    };
    let direction = match *dir {
        "forward" => Direction::Forward,
        "feedback" => Direction::Feedback,
        other => return Err(format!("unknown direction `{other}`; {usage}")),
    };
    Ok(SlotSpec {
        direction,
        start: parse_duration(start)?,
        duration: parse_duration(duration)?,
        band: band.parse().map_err(|_| format!("band `{band}` is not a whole number"))?,
        retransmission: retx,
    })
}

fn parse_channel_losses(text: &str) -> std::result::Result<BTreeMap<ChannelId, f64>, String> {
    let mut out = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (id, p) =
            item.split_once(':').ok_or_else(|| format!("expected `<channel>:<probability>`, got `{item}`"))?;
        let id: ChannelId = id.trim().parse().map_err(|_| format!("bad channel id `{}`", id.trim()))?;
        let p = parse_quantity(ParamKind::Scalar, p)?;
        if out.insert(id, p).is_some() {
            return Err(format!("channel {id} listed twice"));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    path: &'a Path,
    cfg: ScenarioConfig,
    slots: Vec<SlotSpec>,
    sweep_param: Option<(String, usize)>,
    sweep_values: Option<(String, usize)>,
    seeds: Option<usize>,
    out: Option<PathBuf>,
}

impl Parser<'_> {
    fn error(&self, line: usize, message: impl Into<String>) -> CliError {
        CliError::Config { path: self.path.to_path_buf(), line, message: message.into() }
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let path = self.path;
        let bad = |m: String| CliError::Config { path: path.to_path_buf(), line, message: format!("{key}: {m}") };
        match key {
            "scenario.name" => {
                if value.is_empty() {
                    return Err(bad("name must not be empty".into()));
                }
                self.cfg.name = value.to_string();
            }
            "scenario.control_cycle" if value == "auto" => self.cfg.control_cycle = None,
            "scenario.seed" => {
                self.cfg.seed = value.parse().map_err(|_| bad(format!("`{value}` is not a 64-bit seed")))?;
            }
            "mac.variant" => {
                self.cfg.mac.variant = MacVariant::parse(value)
                    .ok_or_else(|| bad(format!("unknown variant `{value}` (gallop, ble_baseline, ideal)")))?;
            }
            "mac.slot" => {
                let slot = parse_slot(value).map_err(bad)?;
                self.slots.push(slot);
            }
            "channel.per_channel_loss" => {
                self.cfg.channel.per_channel_loss = parse_channel_losses(value).map_err(bad)?;
            }
            "sweep.param" => {
                if params::lookup(value).is_none() {
                    return Err(bad(format!("unknown parameter path `{value}`")));
                }
                self.sweep_param = Some((value.to_string(), line));
            }
            "sweep.values" => self.sweep_values = Some((value.to_string(), line)),
            "experiment.seeds" => {
                let n: usize = value.parse().map_err(|_| bad(format!("`{value}` is not a count")))?;
                if n == 0 {
                    return Err(bad("need at least one seed".into()));
                }
                self.seeds = Some(n);
            }
            "experiment.out" => self.out = Some(PathBuf::from(value)),
            _ => {
                let def = params::lookup(key).ok_or_else(|| self.error(line, format!("unknown key `{key}`")))?;
                let v = parse_quantity(def.kind, value).map_err(bad)?;
                params::set_param(&mut self.cfg, key, v).map_err(|e| bad(e.to_string()))?;
            }
        }
        Ok(())
    }
}

pub fn parse(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let mut p = Parser {
        path,
        cfg: ScenarioConfig::default(),
        slots: Vec::new(),
        sweep_param: None,
        sweep_values: None,
        seeds: None,
        out: None,
    };
    let mut section: Option<&str> = None;
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| p.error(line, "unterminated section header"))?.trim();
            let known = SECTIONS
                .iter()
                .find(|s| **s == name)
                .ok_or_else(|| p.error(line, format!("unknown section `[{name}]`")))?;
            section = Some(known);
            continue;
        }
        let (key, value) =
            content.split_once('=').ok_or_else(|| p.error(line, format!("expected `key = value`, got `{content}`")))?;
        let sec = section.ok_or_else(|| p.error(line, "key outside of any section"))?;
        let key = format!("{sec}.{}", key.trim());
        if key != "mac.slot" {
            if let Some(first) = seen.insert(key.clone(), line) {
                return Err(p.error(line, format!("duplicate key `{key}` (first set on line {first})")));
            }
        }
        p.set(&key, value.trim(), line)?;
    }

    if !p.slots.is_empty() {
        p.cfg.mac.custom_slots = Some(std::mem::take(&mut p.slots));
    }
    let sweep = match (p.sweep_param.take(), p.sweep_values.take()) {
        (Some((param, _)), Some((values, line))) => {
            let kind = params::lookup(&param).expect("checked when parsed").kind;
            let values = parse_list(kind, &values).map_err(|m| p.error(line, format!("sweep.values: {m}")))?;
            if values.is_empty() {
                return Err(p.error(line, "sweep.values: empty list"));
            }
            Some(SweepSpec { param, values })
        }
        (Some((_, line)), None) => return Err(p.error(line, "sweep.param given without sweep.values")),
        (None, Some((_, line))) => return Err(p.error(line, "sweep.values given without sweep.param")),
        (None, None) => None,
    };
    p.cfg.validate().map_err(|source| CliError::Invalid { path: path.to_path_buf(), source })?;
    Ok(ExperimentConfig { path: path.to_path_buf(), scenario: p.cfg, sweep, seeds: p.seeds, out: p.out })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(text: &str) -> Result<ExperimentConfig> {
        parse(text, Path::new("test.cfg"))
    }

    fn line_of(err: CliError) -> usize {
        match err {
            CliError::Config { line, .. } => line,
            other => panic!("not a line error: {other}"),
        }
    }

    #[test]
    fn empty_file_is_the_default_scenario() {
        let cfg = parse_str("# nothing\n\n").unwrap();
        assert_eq!(cfg.scenario, ScenarioConfig::default());
        assert_eq!(cfg.sweep, None);
    }

    #[test]
    fn units_are_applied() {
        let cfg = parse_str(
            "[scenario]\ninitial_tilt = 2 deg\nepisode_duration = 1.5s\nadded_delay = 250 us\n\
             [mac]\nble_connection_interval = 7.5 ms\n[plant]\nbody_mass = 0.25\n",
        )
        .unwrap();
        let s = cfg.scenario;
        assert!((s.initial_tilt - 2f64.to_radians()).abs() < 1e-15);
        assert_eq!(s.episode_duration, Nanos::from_millis(1500));
        assert_eq!(s.added_delay, Nanos::from_micros(250));
        assert_eq!(s.mac.ble_connection_interval, Nanos::from_micros(7500));
        assert_eq!(s.plant.body_mass, 0.25);
    }

    #[test]
    fn quantities() {
        assert_eq!(parse_quantity(ParamKind::Duration, "2e-3 s"), Ok(0.002));
        assert_eq!(parse_quantity(ParamKind::Scalar, "1e-4"), Ok(1e-4));
        assert!(parse_quantity(ParamKind::Duration, "2").is_err());
        assert!(parse_quantity(ParamKind::Angle, "0.1").is_err());
        assert!(parse_quantity(ParamKind::Scalar, "3 kg").is_err());
        assert!(parse_quantity(ParamKind::Scalar, "inf").is_err());
        assert!(parse_quantity(ParamKind::Scalar, "nan").is_err());
        assert_eq!(parse_list(ParamKind::Duration, "0 ms, 2ms,5 ms"), Ok(vec![0.0, 0.002, 0.005]));
    }

    #[test]
    fn rejects_unknown_keys_with_line_numbers() {
        assert_eq!(line_of(parse_str("[gains]\nkp_tilt = 1\nkp_tlit = 2\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_str("[gain]\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_str("kp_tilt = 1\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_str("[gains]\nkp_tilt 1\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_str("[gains]\nkp_tilt = 1\nkp_tilt = 2\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_str("[scenario]\nadded_delay = 5\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_str("[mac]\nvariant = wifi\n").unwrap_err()), 2);
    }

    #[test]
    fn slots_and_overlap() {
        let ok = "[mac]\nslots_per_superframe = 3\nslot = forward 0ms 1ms 0\nslot = feedback 1ms 1ms 1\n\
                  slot = forward 2ms 1ms 0 retransmission\n";
        let cfg = parse_str(ok).unwrap();
        let slots = cfg.scenario.mac.custom_slots.unwrap();
        assert_eq!(slots.len(), 3);
        assert!(slots[2].retransmission);

        let err = parse_str("[mac]\nslot = forward 0ms 2ms 0\nslot = feedback 1ms 1ms 1\n").unwrap_err();
        assert!(matches!(err, CliError::Invalid { .. }));
        assert!(err.to_string().contains("slots 0 and 1 overlap"), "{err}");
    }

    #[test]
    fn channel_overrides_and_sweep() {
        let cfg = parse_str(
            "[channel]\nloss = 0.01\nper_channel_loss = 3:0.5, 40:1\n\
             [sweep]\nparam = scenario.added_delay\nvalues = 0 ms, 8 ms\n[experiment]\nseeds = 4\nout = res\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.channel.per_channel_loss.get(&40), Some(&1.0));
        assert_eq!(cfg.sweep.unwrap().values, vec![0.0, 0.008]);
        assert_eq!(cfg.seeds, Some(4));
        assert_eq!(cfg.out, Some(PathBuf::from("res")));
        assert!(parse_str("[sweep]\nparam = scenario.nope\nvalues = 1\n").is_err());
        assert!(parse_str("[sweep]\nparam = scenario.added_delay\nvalues = \n").is_err());
        assert!(parse_str("[channel]\nloss = 1.5\n").is_err());
    }

    #[test]
    fn control_cycle_auto_and_seed() {
        let cfg = parse_str("[scenario]\ncontrol_cycle = auto\nseed = 18446744073709551615\n").unwrap();
        assert_eq!(cfg.scenario.control_cycle, None);
        assert_eq!(cfg.scenario.seed, u64::MAX);
    }
}
