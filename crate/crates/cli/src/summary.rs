//! Per-experiment summary across seeds.

use std::collections::BTreeMap;

use dirgrad_core::algorithms::{Algorithm, RunRecord};
use dirgrad_core::planner::{Plan, Theorem};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub k: u64,
    pub oracle_calls: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_f_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_f_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundVerdict {
    pub theorem: u32,
    pub rhs: f64,
    pub mean_final_gap: f64,
    pub satisfied: bool,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: Algorithm,
    pub n: usize,
    pub p: u32,
    pub seeds: Vec<u64>,
    /// Parameter echo of the first seed's run.
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<Plan>,
    pub checkpoints: Vec<Checkpoint>,
    /// Summed over seeds.
    pub total_oracle_calls: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_mean_f_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_max_f_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundVerdict>,
}

fn theorem_index(t: Theorem) -> u32 {
    match t {
        Theorem::One => 1,
        Theorem::Two => 2,
        Theorem::Three => 3,
        Theorem::Four => 4,
    }
}

/// Mean and max of the gaps, or `None` if any seed lacks one.
fn gap_stats(gaps: impl Iterator<Item = Option<f64>>) -> Option<(f64, f64)> {
    let gaps: Option<Vec<f64>> = gaps.collect();
    let gaps = gaps?;
    if gaps.is_empty() {
        return None;
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Some((mean, gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max)))
}

impl Summary {
    /// Aggregates records that share a checkpoint grid. Rows are matched by
    /// `k`; checkpoints missing from any seed are dropped.
    pub fn from_records(n: usize, p: u32, records: &[RunRecord], plan: Option<Plan>) -> Self {
        let first = &records[0];
        let mut checkpoints = Vec::new();
        for row in &first.rows {
            let rows: Option<Vec<_>> = records.iter().map(|r| r.rows.iter().find(|x| x.k == row.k)).collect();
            let Some(rows) = rows else { continue };
            let stats = gap_stats(rows.iter().map(|r| r.f_gap));
            checkpoints.push(Checkpoint {
                k: row.k,
                oracle_calls: rows.iter().map(|r| r.oracle_calls).max().unwrap_or(0),
                mean_f_gap: stats.map(|s| s.0),
                max_f_gap: stats.map(|s| s.1),
            });
        }
        let finals = gap_stats(records.iter().map(|r| r.final_gap()));
        Summary {
            algorithm: first.algorithm,
            n,
            p,
            seeds: records.iter().filter_map(|r| r.seed).collect(),
            params: first.params.clone(),
            plan,
            checkpoints,
            total_oracle_calls: records.iter().map(|r| r.total_oracle_calls()).sum(),
            final_mean_f_gap: finals.map(|s| s.0),
            final_max_f_gap: finals.map(|s| s.1),
            bound: None,
        }
    }

    /// Compares the final mean gap with `rhs`.
    pub fn judge(&mut self, rhs: f64) -> Option<&BoundVerdict> {
        let mean = self.final_mean_f_gap?;
        let satisfied = mean <= rhs;
        self.bound = Some(BoundVerdict {
            theorem: theorem_index(Theorem::for_algorithm(self.algorithm)),
            rhs,
            mean_final_gap: mean,
            satisfied,
            verdict: format!("bound satisfied: {}", if satisfied { "yes" } else { "no" }),
        });
        self.bound.as_ref()
    }
}
