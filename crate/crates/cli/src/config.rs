//! Experiment configuration: a JSON document with nested sections.
//!
//! ```json
//! {
//!   "problem": { "kind": "quadratic", "n": 16, "spectrum": { "kind": "ones" } },
//!   "oracle": { "kind": "directional" },
//!   "geometry": { "p": 2 },
//!   "algorithm": "ardd",
//!   "parameters": { "N": 512, "m": 1 },
//!   "seeds": [1, 2, 3],
//!   "output": { "dir": "out" }
//! }
//! ```

use std::fmt;
use std::path::PathBuf;

use dirgrad_core::algorithms::{Algorithm, Checkpoints};
use dirgrad_core::oracle::Spectrum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    pub geometry: GeometryConfig,
    pub algorithm: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<Parameters>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanRequest>,
    /// Starting point; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Compare the final mean gap with the convergence bound.
    #[serde(default = "yes")]
    pub bound_check: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Quadratic {
        n: usize,
        spectrum: Spectrum,
        #[serde(default)]
        sigma_sq: f64,
        #[serde(default)]
        mu: f64,
        #[serde(default)]
        sparse_solution: bool,
        #[serde(default)]
        x_star: Option<Vec<f64>>,
        #[serde(default)]
        f_star: f64,
        /// Seed of the instance draw (`x*`), independent of the run seeds.
        #[serde(default)]
        seed: u64,
        /// Hide `f*` and `x*` from the optimizers and the summary.
        #[serde(default)]
        hide_ground_truth: bool,
    },
}

impl ProblemConfig {
    pub fn dim(&self) -> usize {
        match self {
            ProblemConfig::Quadratic { n, .. } => *n,
        }
    }

    pub fn set_dim(&mut self, new: usize) {
        match self {
            ProblemConfig::Quadratic { n, .. } => *n = new,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleConfig {
    Directional {
        #[serde(default)]
        delta_zeta: f64,
        #[serde(default)]
        delta_eta: f64,
    },
    FiniteDifference {
        t: f64,
        #[serde(default)]
        delta: f64,
    },
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig::Directional {
            delta_zeta: 0.0,
            delta_eta: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub p: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<u32>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Inner-iteration constant of the restarted methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Noise floor of the restarted methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    pub epsilon: f64,
    /// `Θ_p`; from the ground truth when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointMode {
    #[default]
    Thinned,
    Every,
    Ends,
}

impl CheckpointMode {
    pub fn policy(self) -> Checkpoints {
        match self {
            CheckpointMode::Thinned => Checkpoints::default(),
            CheckpointMode::Every => Checkpoints::Every,
            CheckpointMode::Ends => Checkpoints::Ends,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub checkpoints: CheckpointMode,
    /// Write wall times to a sidecar file per seed.
    #[serde(default)]
    pub timing: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            format: Format::Csv,
            checkpoints: CheckpointMode::Thinned,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Iteration count `N`.
    #[serde(rename = "N")]
    Iterations,
    /// Dimension `n`.
    #[serde(rename = "n")]
    Dimension,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithms: Option<Vec<Algorithm>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<u32>>,
}

/// Config error anchored at a line of the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    /// Dotted path of the offending field, when known.
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}", self.line)?;
        if self.column > 0 {
            write!(f, ", column {}", self.column)?;
        }
        if let Some(field) = &self.field {
            write!(f, ": field `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ConfigError {
            line: inner.line(),
            column: inner.column(),
            field: (path != "." && !path.is_empty()).then_some(path),
            message: strip_position(&inner.to_string()),
        }
    })?;
    validate(&cfg).map_err(|(field, message)| ConfigError {
        line: locate(text, &field),
        column: 0,
        field: Some(field),
        message,
    })?;
    Ok(cfg)
}

/// serde_json appends " at line L column C"; the position is reported separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// Line of the first occurrence of the last key in a dotted path, or 1.
fn locate(text: &str, field: &str) -> usize {
    let key = field.rsplit('.').next().unwrap_or(field);
    let key = key.split('[').next().unwrap_or(key);
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map_or(1, |i| i + 1)
}

type Invalid = (String, String);

fn invalid(field: &str, message: impl Into<String>) -> Invalid {
    (field.to_string(), message.into())
}

fn positive(field: &str, v: f64) -> Result<(), Invalid> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), Invalid> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be non-negative and finite, got {v}")))
    }
}

pub fn validate(cfg: &ExperimentConfig) -> Result<(), Invalid> {
    let n = cfg.problem.dim();
    match &cfg.problem {
        ProblemConfig::Quadratic {
            n,
            sigma_sq,
            mu,
            x_star,
            f_star,
            ..
        } => {
            if *n < 2 {
                return Err(invalid("problem.n", format!("dimension must be at least 2, got {n}")));
            }
            non_negative("problem.sigma_sq", *sigma_sq)?;
            non_negative("problem.mu", *mu)?;
            if !f_star.is_finite() {
                return Err(invalid("problem.f_star", "must be finite"));
            }
            if let Some(x) = x_star {
                if x.len() != *n {
                    return Err(invalid("problem.x_star", format!("expected {n} entries, got {}", x.len())));
                }
            }
        }
    }
    match cfg.oracle {
        OracleConfig::Directional { delta_zeta, delta_eta } => {
            non_negative("oracle.delta_zeta", delta_zeta)?;
            non_negative("oracle.delta_eta", delta_eta)?;
        }
        OracleConfig::FiniteDifference { t, delta } => {
            positive("oracle.t", t)?;
            non_negative("oracle.delta", delta)?;
        }
    }
    match cfg.geometry.p {
        1 => {
            if n < 3 {
                return Err(invalid("geometry.p", "p = 1 needs n >= 3"));
            }
        }
        2 => {}
        p => return Err(invalid("geometry.p", format!("must be 1 or 2, got {p}"))),
    }
    if let Some(x0) = &cfg.x0 {
        if x0.len() != n {
            return Err(invalid("x0", format!("expected {n} entries, got {}", x0.len())));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("x0", "entries must be finite"));
        }
    }
    match (&cfg.parameters, &cfg.plan) {
        (Some(_), Some(_)) => {
            return Err(invalid("plan", "set exactly one of `parameters` and `plan`, not both"));
        }
        (None, None) => return Err(invalid("parameters", "set exactly one of `parameters` and `plan`")),
        (Some(p), None) => validate_parameters(cfg.algorithm, p, cfg.sweep.as_ref())?,
        (None, Some(plan)) => {
            positive("plan.epsilon", plan.epsilon)?;
            if let Some(t) = plan.theta {
                positive("plan.theta", t)?;
            }
            if let Some(r) = plan.radius {
                positive("plan.R", r)?;
            }
            if let Some(a) = plan.a {
                positive("plan.a", a)?;
            }
        }
    }
    if cfg.seeds.is_empty() {
        return Err(invalid("seeds", "seed list must not be empty"));
    }
    let mut seen = std::collections::BTreeSet::new();
    for s in &cfg.seeds {
        if !seen.insert(s) {
            return Err(invalid("seeds", format!("seed {s} is listed twice")));
        }
    }
    if let Some(sweep) = &cfg.sweep {
        if sweep.values.contains(&0) {
            return Err(invalid("sweep.values", "values must be positive"));
        }
        if let Some(ps) = &sweep.p {
            if let Some(p) = ps.iter().find(|p| **p != 1 && **p != 2) {
                return Err(invalid("sweep.p", format!("must be 1 or 2, got {p}")));
            }
        }
        if sweep.axis == SweepAxis::Dimension && sweep.values.iter().any(|&v| v < 3) {
            return Err(invalid("sweep.values", "dimensions must be at least 3"));
        }
        if sweep.axis == SweepAxis::Dimension && cfg.x0.is_some() {
            return Err(invalid("x0", "a dimension sweep needs the default starting point"));
        }
    }
    Ok(())
}

fn validate_parameters(alg: Algorithm, p: &Parameters, sweep: Option<&SweepConfig>) -> Result<(), Invalid> {
    let sweeps_n = sweep.is_some_and(|s| s.axis == SweepAxis::Iterations);
    if alg.is_restart() {
        if p.outer.is_none() {
            return Err(invalid("parameters.K", format!("{alg} needs the number of restarts `K`")));
        }
        if let Some(r) = p.radius {
            positive("parameters.R", r)?;
        }
        if let Some(a) = p.a {
            positive("parameters.a", a)?;
        }
        if let Some(d) = p.delta {
            non_negative("parameters.delta", d)?;
        }
    } else {
        match p.iterations {
            Some(0) => return Err(invalid("parameters.N", "must be at least 1")),
            None if !sweeps_n => return Err(invalid("parameters.N", format!("{alg} needs `N`"))),
            _ => {}
        }
        if p.m == Some(0) {
            return Err(invalid("parameters.m", "must be at least 1"));
        }
    }
    Ok(())
}
