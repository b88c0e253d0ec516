use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dirgrad_core::algorithms::{Algorithm, RunOptions, RunRecord};
use dirgrad_core::geometry::{DualIndex, PNorm};
use dirgrad_core::oracle::{make_quadratic, sample_direction, QuadraticSpec, Spectrum};
use dirgrad_core::planner::Plan;
use dirgrad_core::rng::seeded;
use dirgrad_core::trace::{write_timing_csv, write_trace_csv, write_trace_jsonl};
use dirgrad_core::verification::{
    check_estimator_identity, check_fd_noise_bounds, check_lemma1, check_mirror_step, MonteCarloReport,
};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Format, PlanRequest, SweepAxis};
use crate::experiment::Experiment;
use crate::summary::Summary;
use crate::CliError;

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(f) = self.format {
            cfg.output.format = f;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

/// Runs every seed, in parallel, returning records in seed-list order.
pub fn run_seeds(exp: &Experiment, options: RunOptions) -> Result<Vec<RunRecord>, CliError> {
    exp.config
        .seeds
        .par_iter()
        .map(|&s| exp.run(s, options))
        .collect()
}

pub fn trace_path(dir: &Path, seed: u64, format: Format) -> PathBuf {
    match format {
        Format::Csv => dir.join(format!("trace-seed-{seed}.csv")),
        Format::Json => dir.join(format!("trace-seed-{seed}.jsonl")),
    }
}

fn write_record(dir: &Path, rec: &RunRecord, format: Format, timing: bool) -> Result<(), CliError> {
    let seed = rec.seed.unwrap_or(0);
    // Wall times never go into data files.
    let mut rows = rec.rows.clone();
    rows.iter_mut().for_each(|r| r.elapsed_ns = None);
    let path = trace_path(dir, seed, format);
    let mut w = create(&path)?;
    match format {
        Format::Csv => write_trace_csv(&mut w, &rows),
        Format::Json => write_trace_jsonl(&mut w, &rows),
    }
    .and_then(|_| w.flush())
    .map_err(|e| io_err(&path, e))?;
    if timing {
        let path = dir.join(format!("trace-seed-{seed}.timing.csv"));
        let mut w = create(&path)?;
        write_timing_csv(&mut w, &rec.rows)
            .and_then(|_| w.flush())
            .map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// `run`: traces per seed plus `summary.json`.
pub fn cmd_run(cfg: ExperimentConfig) -> Result<Summary, CliError> {
    let out = cfg.output.clone();
    let bound_check = cfg.bound_check;
    let exp = Experiment::new(cfg)?;
    let options = RunOptions {
        checkpoints: out.checkpoints.policy(),
        timing: out.timing,
    };
    let records = run_seeds(&exp, options)?;
    fs::create_dir_all(&out.dir).map_err(|e| io_err(&out.dir, e))?;
    for rec in &records {
        write_record(&out.dir, rec, out.format, out.timing)?;
    }
    let mut summary = Summary::from_records(exp.setup.n(), exp.setup.p().index(), &records, exp.plan.clone());
    if bound_check {
        match exp.bound(&records[0])? {
            Some(rhs) if summary.final_mean_f_gap.is_some() => {
                let v = summary.judge(rhs).expect("final gap is known");
                println!("{} (mean gap {:e}, bound {:e})", v.verdict, v.mean_final_gap, v.rhs);
            }
            _ => warn!("ground truth unavailable; bound verdict omitted"),
        }
    }
    if let Some(g) = summary.final_mean_f_gap {
        println!(
            "{}: {} seeds, mean final gap {g:e}, {} oracle calls",
            summary.algorithm,
            summary.seeds.len(),
            summary.total_oracle_calls
        );
    }
    let path = out.dir.join("summary.json");
    write_json(&path, &summary)?;
    info!("wrote {}", path.display());
    Ok(summary)
}

/// `plan`: the planner's parameters for `epsilon` (or the config's target).
pub fn cmd_plan(mut cfg: ExperimentConfig, epsilon: Option<f64>) -> Result<Plan, CliError> {
    match (epsilon, &mut cfg.plan) {
        (Some(e), Some(p)) => p.epsilon = e,
        (Some(e), None) => {
            let params = cfg.parameters.take().unwrap_or_default();
            cfg.plan = Some(PlanRequest {
                epsilon: e,
                theta: None,
                radius: params.radius,
                a: params.a,
            });
        }
        (None, Some(_)) => {}
        (None, None) => return Err(CliError::Config("plan needs --epsilon or a `plan` section".into())),
    }
    let eps = cfg.plan.as_ref().map(|p| p.epsilon).unwrap_or(0.0);
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(CliError::Config(format!("epsilon must be positive and finite, got {eps}")));
    }
    let exp = Experiment::new(cfg)?;
    Ok(exp.plan.expect("plan section is set"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Lemma1,
    Mirror,
    Estimator,
    FdNoise,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyParams {
    pub n: Option<usize>,
    pub samples: Option<u64>,
    pub instances: u64,
    pub tol: f64,
    pub t: f64,
    pub delta: f64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            n: None,
            samples: None,
            instances: 100,
            tol: 1e-6,
            t: 0.1,
            delta: 1e-3,
        }
    }
}

fn core_err(e: dirgrad_core::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

/// `verify`: Monte-Carlo and brute-force reports for one seed.
pub fn cmd_verify(suite: Suite, params: &VerifyParams, seed: u64) -> Result<Vec<MonteCarloReport>, CliError> {
    let mut rng = seeded(seed);
    let mut reports = Vec::new();
    let wants = |s: Suite| suite == s || suite == Suite::All;
    if wants(Suite::Lemma1) {
        let n = params.n.unwrap_or(100);
        if n < 8 {
            warn!("n < 8: Lemma 1 hypothesis violated");
        }
        let samples = params.samples.unwrap_or(100_000);
        for q in [DualIndex::Two, DualIndex::Inf] {
            reports.extend(check_lemma1(n, q, samples, &mut rng).map_err(core_err)?);
        }
    }
    if wants(Suite::Mirror) {
        let n = params.n.unwrap_or(8);
        reports.push(check_mirror_step(PNorm::One, n, params.instances, params.tol, &mut rng).map_err(core_err)?);
    }
    if wants(Suite::Estimator) {
        let n = params.n.unwrap_or(8);
        let mut spec = QuadraticSpec::new(n, Spectrum::Ones);
        spec.x_star = Some(vec![0.0; n]);
        let f = make_quadratic(&spec, &mut rng).map_err(core_err)?;
        let x = sample_direction(&mut rng, n);
        let samples = params.samples.unwrap_or(100_000);
        reports.extend(check_estimator_identity(&f, &x, samples, &mut rng).map_err(core_err)?);
    }
    if wants(Suite::FdNoise) {
        let n = params.n.unwrap_or(8);
        let mut spec = QuadraticSpec::new(n, Spectrum::Linear { min: 0.1, max: 2.0 });
        spec.sigma_sq = 0.5;
        let f = make_quadratic(&spec, &mut rng).map_err(core_err)?;
        let samples = params.samples.unwrap_or(10_000);
        reports.extend(check_fd_noise_bounds(&f, params.t, params.delta, samples, &mut rng).map_err(core_err)?);
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: &'static str,
    pub value: u64,
    pub algorithm: Algorithm,
    pub p: u32,
    pub mean_f_gap: Option<f64>,
    /// Mean over seeds.
    pub oracle_calls: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Slope {
    pub algorithm: Algorithm,
    pub p: u32,
    pub f_gap: Option<f64>,
    pub oracle_calls: Option<f64>,
}

/// Least-squares slope of `ln y` against `ln x`; `None` unless every point
/// is positive and finite.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && y.is_finite())) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub const MIN_SWEEP_POINTS: usize = 3;

/// `sweep`: one row per (algorithm, p, axis value), then log-log slopes.
pub fn cmd_sweep(cfg: ExperimentConfig) -> Result<(Vec<SweepRow>, Vec<Slope>), CliError> {
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs a `sweep` section".into()))?;
    if sweep.values.len() < MIN_SWEEP_POINTS {
        return Err(CliError::Config(format!(
            "sweep needs at least {MIN_SWEEP_POINTS} axis points for slope fitting, got {}",
            sweep.values.len()
        )));
    }
    if sweep.axis == SweepAxis::Iterations && cfg.plan.is_some() {
        return Err(CliError::Config("an N sweep needs explicit `parameters`".into()));
    }
    let algorithms = sweep.algorithms.clone().unwrap_or_else(|| vec![cfg.algorithm]);
    let ps = sweep.p.clone().unwrap_or_else(|| vec![cfg.geometry.p]);
    let options = RunOptions {
        checkpoints: dirgrad_core::algorithms::Checkpoints::Ends,
        timing: false,
    };
    let (axis, axis_name) = match sweep.axis {
        SweepAxis::Iterations => (sweep.axis, "N"),
        SweepAxis::Dimension => (sweep.axis, "n"),
    };
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for &alg in &algorithms {
        for &p in &ps {
            let mut points = Vec::new();
            for &value in &sweep.values {
                let mut c = cfg.clone();
                c.algorithm = alg;
                c.geometry.p = p;
                c.sweep = None;
                if axis == SweepAxis::Dimension {
                    c.problem.set_dim(value as usize);
                }
                crate::config::validate(&c)
                    .map_err(|(field, msg)| CliError::Config(format!("field `{field}`: {msg}")))?;
                let mut exp = Experiment::new(c)?;
                if axis == SweepAxis::Iterations {
                    exp.set_iterations(value)?;
                }
                let records = run_seeds(&exp, options)?;
                let k = records.len() as f64;
                let gaps: Option<Vec<f64>> = records.iter().map(|r| r.final_gap()).collect();
                let row = SweepRow {
                    axis: axis_name,
                    value,
                    algorithm: alg,
                    p,
                    mean_f_gap: gaps.map(|g| g.iter().sum::<f64>() / k),
                    oracle_calls: records.iter().map(|r| r.total_oracle_calls() as f64).sum::<f64>() / k,
                };
                points.push(row.clone());
                rows.push(row);
            }
            let gap_pts: Option<Vec<(f64, f64)>> =
                points.iter().map(|r| r.mean_f_gap.map(|g| (r.value as f64, g))).collect();
            let call_pts: Vec<(f64, f64)> = points.iter().map(|r| (r.value as f64, r.oracle_calls)).collect();
            slopes.push(Slope {
                algorithm: alg,
                p,
                f_gap: gap_pts.and_then(|g| log_log_slope(&g)),
                oracle_calls: log_log_slope(&call_pts),
            });
        }
    }
    let out = &cfg.output;
    fs::create_dir_all(&out.dir).map_err(|e| io_err(&out.dir, e))?;
    match out.format {
        Format::Csv => {
            let path = out.dir.join("sweep.csv");
            let mut w = create(&path)?;
            let body = (|| -> std::io::Result<()> {
                writeln!(w, "axis,value,algorithm,p,mean_f_gap,oracle_calls")?;
                for r in &rows {
                    let gap = r.mean_f_gap.map(|g| g.to_string()).unwrap_or_default();
                    writeln!(w, "{},{},{},{},{},{}", r.axis, r.value, r.algorithm, r.p, gap, r.oracle_calls)?;
                }
                w.flush()
            })();
            body.map_err(|e| io_err(&path, e))?;
        }
        Format::Json => {
            let path = out.dir.join("sweep.jsonl");
            let mut text = String::new();
            for r in &rows {
                text.push_str(&serde_json::to_string(r).map_err(|e| CliError::Runtime(e.to_string()))?);
                text.push('\n');
            }
            fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        }
    }
    let fmt = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    for s in &slopes {
        println!(
            "slope {} p={}: f_gap vs {axis_name} {}, oracle_calls vs {axis_name} {}",
            s.algorithm,
            s.p,
            fmt(s.f_gap),
            fmt(s.oracle_calls)
        );
    }
    Ok((rows, slopes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(-1.5))).collect();
        assert!((log_log_slope(&pts).unwrap() + 1.5).abs() < 1e-12);
        assert_eq!(log_log_slope(&[(1.0, 1.0), (2.0, 0.0)]), None);
        assert_eq!(log_log_slope(&[(2.0, 1.0), (2.0, 3.0)]), None);
    }

    #[test]
    fn verify_suites_pass() {
        let params = VerifyParams {
            n: Some(8),
            samples: Some(10_000),
            instances: 10,
            ..VerifyParams::default()
        };
        let reports = cmd_verify(Suite::All, &params, 1).unwrap();
        assert_eq!(reports.len(), 4 + 1 + 2 + 3);
        assert!(reports.iter().all(|r| r.pass), "{reports:?}");
    }
}
