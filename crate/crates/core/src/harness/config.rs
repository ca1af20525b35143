//! Experiment configuration: a flat key/value record assembled from an optional JSON
//! document and command-line flags, validated against the target command.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytic::{ModelParams, DEFAULT_REGIME_TOL};
use crate::error::{Error, Result};
use crate::harness::phase::PhaseDiagramSpec;
use crate::model_b::{ModelBParams, DEFAULT_DT};

/// Keys accepted in a config document or as flags (`t_end` is spelled `--t-end` on the
/// command line).
pub const KNOWN_KEYS: &[&str] = &[
    "command",
    "N",
    "d",
    "alpha",
    "beta",
    "gamma",
    "dt",
    "steps",
    "t_end",
    "replicas",
    "seed",
    "tol",
    "out",
    "format",
    "level",
    "scheme",
    "stride",
    "alpha_min",
    "alpha_max",
    "alpha_count",
    "beta_count",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Analytic,
    PhaseDiagram,
    McSpectrum,
    SimulateA,
    SimulateB,
    Align,
    Validate,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Analytic,
        Command::PhaseDiagram,
        Command::McSpectrum,
        Command::SimulateA,
        Command::SimulateB,
        Command::Align,
        Command::Validate,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Analytic => "analytic",
            Command::PhaseDiagram => "phase-diagram",
            Command::McSpectrum => "mc-spectrum",
            Command::SimulateA => "simulate-a",
            Command::SimulateB => "simulate-b",
            Command::Align => "align",
            Command::Validate => "validate",
        }
    }

    /// Commands that draw random numbers and therefore need a seed.
    pub fn is_stochastic(&self) -> bool {
        !matches!(self, Command::Analytic | Command::PhaseDiagram)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::usage(format!("command: unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::usage(format!("format: expected csv or json, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidateLevel {
    #[default]
    Quick,
    Full,
}

impl FromStr for ValidateLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(ValidateLevel::Quick),
            "full" => Ok(ValidateLevel::Full),
            _ => Err(Error::usage(format!("level: expected quick or full, got `{s}`"))),
        }
    }
}

/// Simulator used by `simulate-b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Exact,
    Em,
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Scheme::Exact),
            "em" => Ok(Scheme::Em),
            _ => Err(Error::usage(format!("scheme: expected exact or em, got `{s}`"))),
        }
    }
}

/// Model parameters for the command being run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamRecord {
    ModelA(ModelParams<f64>),
    ModelB(ModelBParams),
    Grid(PhaseDiagramSpec),
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub params: ParamRecord,
    pub seed: Option<u64>,
    pub steps: usize,
    pub t_end: f64,
    pub replicas: usize,
    pub stride: usize,
    pub tol: f64,
    pub scheme: Scheme,
    pub level: ValidateLevel,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl ExperimentConfig {
    pub fn model_a(&self) -> Result<&ModelParams<f64>> {
        match &self.params {
            ParamRecord::ModelA(p) => Ok(p),
            _ => Err(Error::usage(format!("{} does not take Model A parameters", self.command))),
        }
    }

    pub fn model_b(&self) -> Result<&ModelBParams> {
        match &self.params {
            ParamRecord::ModelB(p) => Ok(p),
            _ => Err(Error::usage(format!("{} does not take Model B parameters", self.command))),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::usage(format!("seed: {} needs --seed", self.command)))
    }
}

/// Raw key/value pairs before validation.
pub type RawConfig = BTreeMap<String, String>;

/// Reads a config document: a single JSON object with scalar values.
pub fn read_config_file(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_config_document(&text)
}

pub fn parse_config_document(text: &str) -> Result<RawConfig> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::usage(format!("config: malformed JSON: {e}")))?;
    let serde_json::Value::Object(map) = value else {
        return Err(Error::usage("config: document must be a JSON object"));
    };
    let mut raw = RawConfig::new();
    for (key, v) in map {
        let s = match v {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            _ => return Err(Error::usage(format!("{key}: expected a number or string"))),
        };
        raw.insert(key, s);
    }
    Ok(raw)
}

/// Merges `flags` over the document at `file` (if any) and validates the result.
/// A `command` given explicitly takes precedence over both.
pub fn parse_config(command: Option<Command>, flags: &RawConfig, file: Option<&Path>) -> Result<ExperimentConfig> {
    let mut raw = match file {
        Some(p) => read_config_file(p)?,
        None => RawConfig::new(),
    };
    raw.extend(flags.iter().map(|(k, v)| (k.clone(), v.clone())));
    if let Some(c) = command {
        raw.insert("command".into(), c.as_str().into());
    }
    from_raw(&raw)
}

struct Fields<'a>(&'a RawConfig);

impl Fields<'_> {
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(s) => s.trim().parse().map(Some).map_err(|_| Error::usage(format!("{key}: cannot parse `{s}`"))),
        }
    }

    fn require<T: FromStr>(&self, key: &str, command: Command) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::usage(format!("{key}: required by {command}")))
    }

    fn real(&self, key: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.get(key)?;
        match v {
            Some(x) if !x.is_finite() => Err(Error::usage(format!("{key}: must be finite"))),
            _ => Ok(v),
        }
    }
}

fn keyed(key: &str, e: Error) -> Error {
    match e {
        Error::Usage(msg) => Error::usage(format!("{key}: {msg}")),
        other => other,
    }
}

pub fn from_raw(raw: &RawConfig) -> Result<ExperimentConfig> {
    if let Some(k) = raw.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(Error::usage(format!("{k}: unknown key")));
    }
    let f = Fields(raw);
    let command: Command = match raw.get("command") {
        Some(s) => s.parse()?,
        None => return Err(Error::usage("command: missing")),
    };

    let n: Option<usize> = f.get("N")?;
    let d: Option<usize> = f.get("d")?;
    let d_or_default = |n: usize| d.unwrap_or(if n > 2 { 2 } else { 1 });
    let beta = f.real("beta")?.unwrap_or(0.0);
    if beta == 1.0 {
        return Err(Error::usage("beta: the model is degenerate at beta = 1"));
    }
    let tol = f.real("tol")?.unwrap_or(DEFAULT_REGIME_TOL);
    if !(tol > 0.0) {
        return Err(Error::usage("tol: must be positive"));
    }

    let params = match command {
        Command::Analytic | Command::McSpectrum | Command::SimulateA | Command::Align => {
            let n: usize = f.require("N", command)?;
            let alpha = f.real("alpha")?.ok_or_else(|| Error::usage(format!("alpha: required by {command}")))?;
            let p = ModelParams::new(n, d_or_default(n), alpha, beta).map_err(|e| keyed("params", e))?;
            ParamRecord::ModelA(p)
        }
        Command::SimulateB => {
            let n: usize = f.require("N", command)?;
            let gamma = f.real("gamma")?.ok_or_else(|| Error::usage(format!("gamma: required by {command}")))?;
            let dt = f.real("dt")?.unwrap_or(DEFAULT_DT);
            ParamRecord::ModelB(ModelBParams::new(n, d_or_default(n), gamma, dt).map_err(|e| keyed("params", e))?)
        }
        Command::PhaseDiagram => {
            let n: usize = f.require("N", command)?;
            let spec = PhaseDiagramSpec::log_grid(
                n,
                f.real("alpha_min")?.unwrap_or(0.1),
                f.real("alpha_max")?.unwrap_or(10.0),
                f.get("alpha_count")?.unwrap_or(60),
                f.get("beta_count")?.unwrap_or(20),
                tol,
            )?;
            ParamRecord::Grid(spec)
        }
        Command::Validate => {
            if n.is_some() {
                return Err(Error::usage("N: validate runs a fixed suite and takes no model parameters"));
            }
            ParamRecord::None
        }
    };

    let seed = f.get("seed")?;
    if command.is_stochastic() && seed.is_none() {
        return Err(Error::usage(format!("seed: {command} needs --seed")));
    }
    let default_steps = match command {
        Command::McSpectrum => 100_000,
        _ => 2_000,
    };
    let steps: usize = f.get("steps")?.unwrap_or(default_steps);
    if steps == 0 {
        return Err(Error::usage("steps: must be positive"));
    }
    let t_end = f.real("t_end")?.unwrap_or(10.0);
    if !(t_end > 0.0) {
        return Err(Error::usage("t_end: must be positive"));
    }
    let replicas: usize = f.get("replicas")?.unwrap_or(1);
    if replicas == 0 {
        return Err(Error::usage("replicas: must be positive"));
    }
    let stride: usize = f.get("stride")?.unwrap_or(match command {
        Command::SimulateB => 100,
        _ => (steps / 1000).max(1),
    });
    if stride == 0 {
        return Err(Error::usage("stride: must be positive"));
    }

    Ok(ExperimentConfig {
        command,
        params,
        seed,
        steps,
        t_end,
        replicas,
        stride,
        tol,
        scheme: f.get::<String>("scheme")?.map(|s| s.parse()).transpose()?.unwrap_or_default(),
        level: f.get::<String>("level")?.map(|s| s.parse()).transpose()?.unwrap_or_default(),
        out: f.get::<String>("out")?.map(PathBuf::from),
        format: f.get::<String>("format")?.map(|s| s.parse()).transpose()?.unwrap_or_default(),
    })
}
