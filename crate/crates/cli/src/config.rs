//! Experiment configuration and its flat `key = value` file format.
//!
//! Every field is optional so that a file, the command line and the
//! per-command defaults can be layered. Keys match the long flag names.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use brq_core::channel::Accounting;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Analytic,
    Simulate,
    Fig4,
    Fig5,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Rayleigh,
    Deterministic,
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

macro_rules! keyword_enum {
    ($ty:ty { $($name:literal => $v:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($v),)+
                    _ => Err(format!("expected one of: {}", [$($name),+].join(", "))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $v { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

keyword_enum!(CommandKind {
    "analytic" => CommandKind::Analytic,
    "simulate" => CommandKind::Simulate,
    "fig4" => CommandKind::Fig4,
    "fig5" => CommandKind::Fig5,
    "validate" => CommandKind::Validate,
});

keyword_enum!(ModelKind {
    "rayleigh" => ModelKind::Rayleigh,
    "deterministic" => ModelKind::Deterministic,
    "trace" => ModelKind::Trace,
});

keyword_enum!(Format {
    "csv" => Format::Csv,
    "json" => Format::Json,
});

/// Evenly spaced grid written `start:stop:step`, both ends included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl FromStr for Grid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts[..] else {
            return Err("expected start:stop:step".into());
        };
        let g = Grid {
            start: parse_f64(a)?,
            stop: parse_f64(b)?,
            step: parse_f64(c)?,
        };
        if !(g.step > 0.0) || g.stop < g.start {
            return Err("need step > 0 and stop >= start".into());
        }
        if (g.stop - g.start) / g.step > 1e6 {
            return Err("grid has more than a million points".into());
        }
        Ok(g)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("not a number: {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: {s:?}"))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    let v = s.split(',').map(parse_f64).collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(v)
}

fn show_list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

fn parse_mode(s: &str) -> Result<Accounting, String> {
    match s {
        "fluid" => Ok(Accounting::Fluid),
        "integer" => Ok(Accounting::Integer),
        _ => Err("expected fluid or integer".into()),
    }
}

fn show_mode(m: Accounting) -> String {
    match m {
        Accounting::Fluid => "fluid".into(),
        Accounting::Integer => "integer".into(),
    }
}

fn parse_count<T: FromStr>(s: &str) -> Result<T, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("not a non-negative integer: {s:?}"))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    pub command: Option<CommandKind>,
    pub model: Option<ModelKind>,
    /// Mean SNR in dB (deterministic: the fixed SNR). Several for `analytic`
    /// and `fig4`.
    pub mean_snr_db: Option<Vec<f64>>,
    /// File of per-slot SNRs in dB, one per line.
    pub trace: Option<PathBuf>,
    pub rate: Option<f64>,
    pub rate_factor: Option<Vec<f64>>,
    pub slot_len: Option<u32>,
    pub feedback_bits: Option<Vec<f64>>,
    pub block_len: Option<usize>,
    pub seed: Option<u64>,
    pub slots: Option<u64>,
    pub replications: Option<usize>,
    pub mode: Option<Accounting>,
    pub include_warmup: Option<bool>,
    pub payload: Option<bool>,
    pub snr_grid_db: Option<Grid>,
    pub ratio_grid: Option<Grid>,
    pub simulate: Option<bool>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub log: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Keys in file order.
pub const KEYS: &[&str] = &[
    "command",
    "model",
    "mean-snr-db",
    "trace",
    "rate",
    "rate-factor",
    "slot-len",
    "feedback-bits",
    "block-len",
    "seed",
    "slots",
    "replications",
    "mode",
    "include-warmup",
    "payload",
    "snr-grid-db",
    "ratio-grid",
    "simulate",
    "out",
    "format",
    "log",
    "threads",
];

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        let bad = |e: String| CliError::Usage(format!("{key} = {v:?}: {e}"));
        match key {
            "command" => self.command = Some(v.parse().map_err(bad)?),
            "model" => self.model = Some(v.parse().map_err(bad)?),
            "mean-snr-db" => self.mean_snr_db = Some(parse_list(v).map_err(bad)?),
            "trace" => self.trace = Some(PathBuf::from(v)),
            "rate" => self.rate = Some(parse_f64(v).map_err(bad)?),
            "rate-factor" => self.rate_factor = Some(parse_list(v).map_err(bad)?),
            "slot-len" => self.slot_len = Some(parse_count(v).map_err(bad)?),
            "feedback-bits" => self.feedback_bits = Some(parse_list(v).map_err(bad)?),
            "block-len" => self.block_len = Some(parse_count(v).map_err(bad)?),
            "seed" => self.seed = Some(parse_count(v).map_err(bad)?),
            "slots" => self.slots = Some(parse_count(v).map_err(bad)?),
            "replications" => self.replications = Some(parse_count(v).map_err(bad)?),
            "mode" => self.mode = Some(parse_mode(v).map_err(bad)?),
            "include-warmup" => self.include_warmup = Some(parse_bool(v).map_err(bad)?),
            "payload" => self.payload = Some(parse_bool(v).map_err(bad)?),
            "snr-grid-db" => self.snr_grid_db = Some(v.parse().map_err(bad)?),
            "ratio-grid" => self.ratio_grid = Some(v.parse().map_err(bad)?),
            "simulate" => self.simulate = Some(parse_bool(v).map_err(bad)?),
            "out" => self.out = Some(PathBuf::from(v)),
            "format" => self.format = Some(v.parse().map_err(bad)?),
            "log" => self.log = Some(PathBuf::from(v)),
            "threads" => self.threads = Some(parse_count(v).map_err(bad)?),
            _ => return Err(CliError::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        match key {
            "command" => self.command.map(|c| c.to_string()),
            "model" => self.model.map(|m| m.to_string()),
            "mean-snr-db" => self.mean_snr_db.as_deref().map(show_list),
            "trace" => path(&self.trace),
            "rate" => self.rate.map(|x| x.to_string()),
            "rate-factor" => self.rate_factor.as_deref().map(show_list),
            "slot-len" => self.slot_len.map(|x| x.to_string()),
            "feedback-bits" => self.feedback_bits.as_deref().map(show_list),
            "block-len" => self.block_len.map(|x| x.to_string()),
            "seed" => self.seed.map(|x| x.to_string()),
            "slots" => self.slots.map(|x| x.to_string()),
            "replications" => self.replications.map(|x| x.to_string()),
            "mode" => self.mode.map(show_mode),
            "include-warmup" => self.include_warmup.map(|x| x.to_string()),
            "payload" => self.payload.map(|x| x.to_string()),
            "snr-grid-db" => self.snr_grid_db.map(|g| g.to_string()),
            "ratio-grid" => self.ratio_grid.map(|g| g.to_string()),
            "simulate" => self.simulate.map(|x| x.to_string()),
            "out" => path(&self.out),
            "format" => self.format.map(|f| f.to_string()),
            "log" => path(&self.log),
            "threads" => self.threads.map(|x| x.to_string()),
            _ => None,
        }
    }

    /// Parses a config file. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut c = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key = value", n + 1))
            })?;
            c.set(k.trim(), v)?;
        }
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        KEYS.iter()
            .filter_map(|k| self.get(k).map(|v| format!("{k} = {v}\n")))
            .collect()
    }

    /// Overwrites fields that are set in `other`.
    pub fn merge(&mut self, other: &ExperimentConfig) {
        for k in KEYS {
            if let Some(v) = other.get(k) {
                self.set(k, &v).expect("value printed by get parses");
            }
        }
    }
}
