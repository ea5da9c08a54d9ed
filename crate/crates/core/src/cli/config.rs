//! Run configuration: INI file, then command-line overrides.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{ColumnMap, Dimension};
use crate::error::{Error, Result};
use crate::lld::{ThresholdConfig, DEFAULT_PUPIL_RING};
use crate::selection::{shift_frames, Protocol, ShiftConfig, SweepConfig};

/// Which sweep grid `select` runs. `All` runs every protocol, sharing
/// cells that coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolChoice {
    One(Protocol),
    All,
}

impl FromStr for ProtocolChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("all") {
            Ok(ProtocolChoice::All)
        } else {
            s.parse().map(ProtocolChoice::One)
        }
    }
}

impl std::fmt::Display for ProtocolChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProtocolChoice::One(p) => p.fmt(f),
            ProtocolChoice::All => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dimension: Dimension,
    pub protocol: ProtocolChoice,
    pub sweep: SweepConfig,
    pub descriptors: ThresholdConfig,
    pub pupil_ring: Vec<usize>,
    pub columns: ColumnMap,
    /// Sweep again on fused features instead of reusing the eye choice.
    pub retune_fused: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dimension: Dimension::Arousal,
            protocol: ProtocolChoice::One(Protocol::During),
            sweep: SweepConfig::default(),
            descriptors: ThresholdConfig::default(),
            pupil_ring: DEFAULT_PUPIL_RING.to_vec(),
            columns: ColumnMap::default(),
            retune_fused: false,
        }
    }
}

fn bad(section: &str, key: &str, value: &str) -> Error {
    Error::Config(format!("[{section}] {key} = {value}: invalid value"))
}

fn parse_value<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| bad(section, key, value))
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(section, key, value)),
    }
}

/// Comma-separated list.
pub fn parse_list<T: FromStr>(text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Config(format!("cannot parse list item `{s}`"))))
        .collect()
}

/// `start:end:step` in seconds, or a comma-separated list. Values are
/// snapped to whole frames.
pub fn parse_shifts(text: &str) -> Result<ShiftConfig> {
    let raw: Vec<f64> = if text.contains(':') {
        let parts: Vec<f64> = parse_list(&text.replace(':', ","))?;
        let [start, end, step] = parts[..] else {
            return Err(Error::Config(format!("shift range `{text}` must be start:end:step")));
        };
        if !(step > 0.0) || end < start {
            return Err(Error::Config(format!("shift range `{text}` is empty")));
        }
        let n = ((end - start) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| start + k as f64 * step).collect()
    } else {
        parse_list(text)?
    };
    let mut shifts = Vec::with_capacity(raw.len());
    for s in raw {
        let frames = (s * 25.0).round();
        if (s * 25.0 - frames).abs() > 1e-6 {
            return Err(Error::Config(format!("shift {s} s is not a whole number of frames")));
        }
        shifts.push(frames / 25.0);
    }
    let cfg = ShiftConfig { shifts };
    cfg.frames()?;
    Ok(cfg)
}

fn fmt_list<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Defaults overridden by every key present in the INI text. Unknown
    /// sections or keys are rejected so typos do not pass silently.
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = ini::Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = RunConfig::default();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            for (key, value) in props.iter() {
                cfg.set(section, key, value)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let m = &mut self.sweep.model;
        let d = &mut self.descriptors;
        let c = &mut self.columns;
        match (section, key) {
            ("run", "dimension") => self.dimension = value.parse()?,
            ("run", "protocol") => self.protocol = value.parse()?,
            ("run", "retune_fused") => self.retune_fused = parse_bool(section, key, value)?,
            ("selection", "thresholds") => self.sweep.thresholds = parse_list(value)?,
            ("selection", "shifts") => self.sweep.shifts = parse_shifts(value)?,
            ("selection", "bins") => self.sweep.bins = parse_value(section, key, value)?,
            ("selection", "each_threshold") => self.sweep.during_all_thresholds = parse_bool(section, key, value)?,
            ("model", "hidden_sizes") => m.hidden_sizes = parse_list(value)?,
            ("model", "learning_rate") => m.learning_rate = parse_value(section, key, value)?,
            ("model", "input_noise_sd") => m.input_noise_sd = parse_value(section, key, value)?,
            ("model", "max_epochs") => m.max_epochs = parse_value(section, key, value)?,
            ("model", "patience_epochs") => m.patience_epochs = parse_value(section, key, value)?,
            ("model", "seed") => m.seed = parse_value(section, key, value)?,
            ("model", "momentum") => m.momentum = parse_value(section, key, value)?,
            ("model", "init_range") => m.init_range = parse_value(section, key, value)?,
            ("model", "forget_bias") => m.forget_bias = parse_value(section, key, value)?,
            ("descriptors", "closure_threshold") => d.closure_threshold = parse_value(section, key, value)?,
            ("descriptors", "fixation_threshold") => d.fixation_threshold = parse_value(section, key, value)?,
            ("descriptors", "approach_epsilon") => d.approach_epsilon = parse_value(section, key, value)?,
            ("descriptors", "pupil_delta") => d.pupil_delta = parse_value(section, key, value)?,
            ("descriptors", "direct_gaze_angle") => d.direct_gaze_angle = parse_value(section, key, value)?,
            ("descriptors", "pupil_ring") => self.pupil_ring = parse_list(value)?,
            ("columns", "frame") => c.frame = value.trim().into(),
            ("columns", "timestamp") => c.timestamp = value.trim().into(),
            ("columns", "confidence") => c.confidence = value.trim().into(),
            ("columns", "gaze_x") => c.gaze_x = value.trim().into(),
            ("columns", "gaze_y") => c.gaze_y = value.trim().into(),
            ("columns", "blink_intensity") => c.blink_intensity = value.trim().into(),
            ("columns", "pupil_diameter") => c.pupil_diameter = value.trim().into(),
            ("columns", "direct_gaze") => c.direct_gaze = value.trim().into(),
            ("columns", "landmark_x") => c.landmark_prefixes[0] = value.trim().into(),
            ("columns", "landmark_y") => c.landmark_prefixes[1] = value.trim().into(),
            ("columns", "landmark_z") => c.landmark_prefixes[2] = value.trim().into(),
            _ => return Err(Error::Config(format!("unknown setting [{section}] {key}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.sweep.model.validate()?;
        if self.sweep.thresholds.is_empty() {
            return Err(Error::Config("at least one MI threshold is required".into()));
        }
        if self.sweep.shifts.shifts.is_empty() {
            return Err(Error::Config("at least one shift is required".into()));
        }
        for &s in &self.sweep.shifts.shifts {
            shift_frames(s)?;
        }
        if self.sweep.bins < 2 {
            return Err(Error::Config("bins must be at least 2".into()));
        }
        if self.pupil_ring.len() < 3 {
            return Err(Error::Config("pupil ring needs at least 3 landmark indices".into()));
        }
        Ok(())
    }

    /// Effective settings in the same INI layout the loader reads.
    pub fn to_ini_string(&self) -> String {
        let m = &self.sweep.model;
        let d = &self.descriptors;
        let c = &self.columns;
        let mut out = String::new();
        let shifts = fmt_list(&self.sweep.shifts.shifts);
        let _ = writeln!(out, "[run]");
        let _ = writeln!(out, "dimension = {}", self.dimension);
        let _ = writeln!(out, "protocol = {}", self.protocol);
        let _ = writeln!(out, "retune_fused = {}\n", self.retune_fused);
        let _ = writeln!(out, "[selection]");
        let _ = writeln!(out, "thresholds = {}", fmt_list(&self.sweep.thresholds));
        let _ = writeln!(out, "shifts = {shifts}");
        let _ = writeln!(out, "bins = {}", self.sweep.bins);
        let _ = writeln!(out, "each_threshold = {}\n", self.sweep.during_all_thresholds);
        let _ = writeln!(out, "[model]");
        let _ = writeln!(out, "hidden_sizes = {}", fmt_list(&m.hidden_sizes));
        let _ = writeln!(out, "learning_rate = {}", m.learning_rate);
        let _ = writeln!(out, "input_noise_sd = {}", m.input_noise_sd);
        let _ = writeln!(out, "max_epochs = {}", m.max_epochs);
        let _ = writeln!(out, "patience_epochs = {}", m.patience_epochs);
        let _ = writeln!(out, "seed = {}", m.seed);
        let _ = writeln!(out, "momentum = {}", m.momentum);
        let _ = writeln!(out, "init_range = {}", m.init_range);
        let _ = writeln!(out, "forget_bias = {}\n", m.forget_bias);
        let _ = writeln!(out, "[descriptors]");
        let _ = writeln!(out, "closure_threshold = {}", d.closure_threshold);
        let _ = writeln!(out, "fixation_threshold = {}", d.fixation_threshold);
        let _ = writeln!(out, "approach_epsilon = {}", d.approach_epsilon);
        let _ = writeln!(out, "pupil_delta = {}", d.pupil_delta);
        let _ = writeln!(out, "direct_gaze_angle = {}", d.direct_gaze_angle);
        let _ = writeln!(out, "pupil_ring = {}\n", fmt_list(&self.pupil_ring));
        let _ = writeln!(out, "[columns]");
        let _ = writeln!(out, "frame = {}", c.frame);
        let _ = writeln!(out, "timestamp = {}", c.timestamp);
        let _ = writeln!(out, "confidence = {}", c.confidence);
        let _ = writeln!(out, "gaze_x = {}", c.gaze_x);
        let _ = writeln!(out, "gaze_y = {}", c.gaze_y);
        let _ = writeln!(out, "blink_intensity = {}", c.blink_intensity);
        let _ = writeln!(out, "pupil_diameter = {}", c.pupil_diameter);
        let _ = writeln!(out, "direct_gaze = {}", c.direct_gaze);
        let _ = writeln!(out, "landmark_x = {}", c.landmark_prefixes[0]);
        let _ = writeln!(out, "landmark_y = {}", c.landmark_prefixes[1]);
        let _ = writeln!(out, "landmark_z = {}", c.landmark_prefixes[2]);
        out
    }
}
