//! Run manifests: flat `section.key = value` text.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! line    := blank | comment | entry
//! comment := '#' anything
//! entry   := section '.' key ws? '=' ws? value ws? comment?
//! ```
//!
//! Keys are case-sensitive; unknown or repeated keys are errors. Booleans
//! are `true`/`false`/`on`/`off`; reals accept an optional `pi` suffix
//! (`2pi`, `0.5pi`, `pi`).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Verify,
    Flow,
    Inspect,
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "verify" => Ok(Self::Verify),
            "flow" => Ok(Self::Flow),
            "inspect" => Ok(Self::Inspect),
            other => Err(Error::Config(format!("unknown command `{other}`"))),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Verify => "verify",
            Self::Flow => "flow",
            Self::Inspect => "inspect",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSettings {
    /// `None`: `safety · (L/(πN))²`.
    pub dt0: Option<f64>,
    pub safety: f64,
    pub max_steps: usize,
    pub stop_grad: f64,
    pub stop_energy: f64,
    pub snapshot_every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub command: Option<Command>,
    pub n: usize,
    pub grid: usize,
    pub period: f64,
    pub dealias: bool,
    pub rank: usize,
    pub background: bool,
    pub amplitude: f64,
    pub band: usize,
    pub seed: u64,
    pub flow: FlowSettings,
    pub output_dir: PathBuf,
    pub tol_scale: f64,
    /// Start state for `flow` and the state examined by `inspect`.
    pub input_snapshot: Option<PathBuf>,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            command: None,
            n: 2,
            grid: 8,
            period: 2.0 * PI,
            dealias: true,
            rank: 2,
            background: false,
            amplitude: 0.1,
            band: 2,
            seed: 1,
            flow: FlowSettings {
                dt0: None,
                safety: 0.2,
                max_steps: 200,
                stop_grad: 1e-12,
                stop_energy: 0.0,
                snapshot_every: 0,
            },
            output_dir: PathBuf::from("ymbar-out"),
            tol_scale: 1.0,
            input_snapshot: None,
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" => Ok(true),
        "false" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true/false, got `{v}`"))),
    }
}

fn parse_real(key: &str, v: &str) -> Result<f64> {
    let bad = || Error::Config(format!("{key}: expected a real number, got `{v}`"));
    let x = match v.strip_suffix("pi") {
        Some("") => PI,
        Some(head) => head.trim().parse::<f64>().map_err(|_| bad())? * PI,
        None => v.parse::<f64>().map_err(|_| bad())?,
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad())
    }
}

fn parse_int<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got `{v}`")))
}

impl RunManifest {
    /// Parses manifest text on top of the defaults, then validates.
    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Self::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Config(format!("line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `section.key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !key.contains('.') {
                return Err(at(format!("key `{key}` has no section")));
            }
            if value.is_empty() {
                return Err(at(format!("`{key}` has no value")));
            }
            if seen.insert(key.to_string(), lineno + 1).is_some() {
                return Err(at(format!("`{key}` given twice")));
            }
            m.set(key, value).map_err(|e| match e {
                Error::Config(msg) => at(msg),
                other => other,
            })?;
        }
        m.validate()?;
        Ok(m)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "run.command" => self.command = Some(v.parse()?),
            "geometry.n" => self.n = parse_int(key, v)?,
            "geometry.grid" => self.grid = parse_int(key, v)?,
            "geometry.period" => self.period = parse_real(key, v)?,
            "geometry.dealias" => self.dealias = parse_bool(key, v)?,
            "bundle.rank" => self.rank = parse_int(key, v)?,
            "bundle.background" => self.background = parse_bool(key, v)?,
            "bundle.amplitude" => self.amplitude = parse_real(key, v)?,
            "bundle.band" => self.band = parse_int(key, v)?,
            "bundle.seed" => self.seed = parse_int(key, v)?,
            "flow.dt0" => self.flow.dt0 = Some(parse_real(key, v)?),
            "flow.safety" => self.flow.safety = parse_real(key, v)?,
            "flow.max_steps" => self.flow.max_steps = parse_int(key, v)?,
            "flow.stop_grad" => self.flow.stop_grad = parse_real(key, v)?,
            "flow.stop_energy" => self.flow.stop_energy = parse_real(key, v)?,
            "flow.snapshot_every" => self.flow.snapshot_every = parse_int(key, v)?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            "tolerance.scale" => self.tol_scale = parse_real(key, v)?,
            "input.snapshot" => self.input_snapshot = Some(PathBuf::from(v)),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(1..=2).contains(&self.n) {
            return bad(format!("geometry.n must be 1 or 2, got {}", self.n));
        }
        if self.grid < 4 || !self.grid.is_multiple_of(2) {
            return bad(format!("geometry.grid must be even and at least 4, got {}", self.grid));
        }
        if !(self.period > 0.0) {
            return bad(format!("geometry.period must be positive, got {}", self.period));
        }
        if self.rank == 0 {
            return bad("bundle.rank must be positive".into());
        }
        if self.background && (self.rank != 1 || self.n != 2) {
            return bad("bundle.background needs rank 1 and n = 2".into());
        }
        if !(self.amplitude >= 0.0) {
            return bad(format!("bundle.amplitude must be non-negative, got {}", self.amplitude));
        }
        if self.band == 0 || self.band > self.grid / 2 - 1 {
            return bad(format!("bundle.band must lie in 1..={}, got {}", self.grid / 2 - 1, self.band));
        }
        if let Some(dt0) = self.flow.dt0 {
            if !(dt0 > 0.0) {
                return bad(format!("flow.dt0 must be positive, got {dt0}"));
            }
        }
        if !(self.flow.safety > 0.0 && self.flow.safety <= 1.0) {
            return bad(format!("flow.safety must lie in (0, 1], got {}", self.flow.safety));
        }
        if !(self.flow.stop_grad >= 0.0 && self.flow.stop_energy >= 0.0) {
            return bad("flow stopping thresholds must be non-negative".into());
        }
        if !(self.tol_scale > 0.0) {
            return bad(format!("tolerance.scale must be positive, got {}", self.tol_scale));
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(c) = self.command {
            s += &format!("run.command = {c}\n");
        }
        s += &format!("geometry.n = {}\n", self.n);
        s += &format!("geometry.grid = {}\n", self.grid);
        s += &format!("geometry.period = {:?}\n", self.period);
        s += &format!("geometry.dealias = {}\n", self.dealias);
        s += &format!("bundle.rank = {}\n", self.rank);
        s += &format!("bundle.background = {}\n", self.background);
        s += &format!("bundle.amplitude = {:?}\n", self.amplitude);
        s += &format!("bundle.band = {}\n", self.band);
        s += &format!("bundle.seed = {}\n", self.seed);
        if let Some(dt0) = self.flow.dt0 {
            s += &format!("flow.dt0 = {dt0:?}\n");
        }
        s += &format!("flow.safety = {:?}\n", self.flow.safety);
        s += &format!("flow.max_steps = {}\n", self.flow.max_steps);
        s += &format!("flow.stop_grad = {:?}\n", self.flow.stop_grad);
        s += &format!("flow.stop_energy = {:?}\n", self.flow.stop_energy);
        s += &format!("flow.snapshot_every = {}\n", self.flow.snapshot_every);
        s += &format!("output.dir = {}\n", self.output_dir.display());
        s += &format!("tolerance.scale = {:?}\n", self.tol_scale);
        if let Some(p) = &self.input_snapshot {
            s += &format!("input.snapshot = {}\n", p.display());
        }
        s
    }
}
