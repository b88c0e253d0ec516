//! The four optimizers and the per-run trace they produce.

mod ardd;
mod rdd;
mod restart;

pub use ardd::{run_ardd, ArddState};
pub use rdd::{run_rdd, RddState};
pub use restart::{
    radius_sq, restart_batch_size, restart_inner_iterations, run_arddsc, run_rddsc,
    theoretical_delta, Acceleration, RestartParams, RestartState,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::ObjectiveInfo;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ardd,
    Rdd,
    Arddsc,
    Rddsc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Ardd, Algorithm::Rdd, Algorithm::Arddsc, Algorithm::Rddsc];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ardd => "ardd",
            Algorithm::Rdd => "rdd",
            Algorithm::Arddsc => "arddsc",
            Algorithm::Rddsc => "rddsc",
        }
    }

    pub fn is_restart(self) -> bool {
        matches!(self, Algorithm::Arddsc | Algorithm::Rddsc)
    }

    pub fn acceleration(self) -> Acceleration {
        match self {
            Algorithm::Ardd | Algorithm::Arddsc => Acceleration::Accelerated,
            Algorithm::Rdd | Algorithm::Rddsc => Acceleration::NonAccelerated,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::invalid("algorithm", format!("unknown algorithm `{s}` (expected ardd, rdd, arddsc or rddsc)"))
            })
    }
}

/// One checkpoint of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: u64,
    /// Cumulative directional-derivative (or value-pair) evaluations.
    pub oracle_calls: u64,
    pub f_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ns: Option<u64>,
}

/// Trace of a single run: checkpoints, the returned point, and a parameter echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub seed: Option<u64>,
    pub params: BTreeMap<String, serde_json::Value>,
    pub rows: Vec<TraceRow>,
    pub output: Vec<f64>,
}

impl RunRecord {
    pub fn new(algorithm: Algorithm) -> Self {
        RunRecord {
            algorithm,
            seed: None,
            params: BTreeMap::new(),
            rows: Vec::new(),
            output: Vec::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub(crate) fn echo(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.params.insert(key.to_string(), value.into());
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn total_oracle_calls(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.oracle_calls)
    }

    pub fn final_gap(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.f_gap)
    }

    /// Gap at checkpoint `k`, if that checkpoint was recorded.
    pub fn gap_at(&self, k: u64) -> Option<f64> {
        self.rows.iter().find(|r| r.k == k).and_then(|r| r.f_gap)
    }
}

/// Which iterations get a trace row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Checkpoints {
    Every,
    /// Every iteration up to `dense_until`, then every 10th up to
    /// `10·dense_until`, every 100th up to `100·dense_until`, and so on.
    Thinned { dense_until: u64 },
    /// Only `k = 0` and the final iteration.
    Ends,
}

impl Default for Checkpoints {
    fn default() -> Self {
        Checkpoints::Thinned { dense_until: 10_000 }
    }
}

impl Checkpoints {
    pub fn records(self, k: u64, last: u64) -> bool {
        if k == 0 || k == last {
            return true;
        }
        match self {
            Checkpoints::Every => true,
            Checkpoints::Ends => false,
            Checkpoints::Thinned { dense_until } => {
                let (mut stride, mut bound) = (1u64, dense_until.max(1));
                while k > bound {
                    stride = stride.saturating_mul(10);
                    bound = bound.saturating_mul(10);
                }
                k % stride == 0
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub checkpoints: Checkpoints,
    /// Record wall time per row. Off by default so traces stay reproducible.
    pub timing: bool,
}

pub(crate) struct Recorder<'a> {
    info: &'a dyn ObjectiveInfo,
    options: RunOptions,
    start: Instant,
    last: u64,
    pub rows: Vec<TraceRow>,
}

impl<'a> Recorder<'a> {
    pub fn new(info: &'a dyn ObjectiveInfo, options: RunOptions, last: u64) -> Self {
        Recorder {
            info,
            options,
            start: Instant::now(),
            last,
            rows: Vec::new(),
        }
    }

    pub fn wants(&self, k: u64) -> bool {
        self.options.checkpoints.records(k, self.last)
    }

    pub fn record(&mut self, k: u64, oracle_calls: u64, x: &[f64]) {
        let f_value = self.info.expected_value(x);
        let f_gap = match (f_value, self.info.f_star()) {
            (Some(v), Some(s)) => Some(v - s),
            _ => None,
        };
        let elapsed_ns = self
            .options
            .timing
            .then(|| self.start.elapsed().as_nanos().min(u64::MAX as u128) as u64);
        self.rows.push(TraceRow {
            k,
            oracle_calls,
            f_gap,
            f_value: if f_gap.is_none() { f_value } else { None },
            elapsed_ns,
        });
    }
}

pub(crate) fn check_run_args(iterations: u64, m: usize, lipschitz: f64) -> Result<()> {
    if iterations == 0 {
        return Err(Error::invalid("N", "number of iterations must be at least 1"));
    }
    if m == 0 {
        return Err(Error::invalid("m", "batch size must be at least 1"));
    }
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return Err(Error::invalid("L2", format!("Lipschitz constant must be positive, got {lipschitz}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_roundtrip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        let err = "adam".parse::<Algorithm>().unwrap_err();
        assert!(err.to_string().contains("algorithm"));
    }

    #[test]
    fn thinned_checkpoints() {
        let c = Checkpoints::Thinned { dense_until: 100 };
        assert!((0..=100).all(|k| c.records(k, 5000)));
        assert!(!c.records(101, 5000));
        assert!(c.records(110, 5000));
        assert!(!c.records(1010, 5000));
        assert!(c.records(1100, 5000));
        assert!(c.records(4999, 4999));
        assert!(Checkpoints::Ends.records(0, 7) && Checkpoints::Ends.records(7, 7));
        assert!(!Checkpoints::Ends.records(3, 7));
    }
}
