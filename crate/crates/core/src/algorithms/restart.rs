//! Restarted variants for strongly convex objectives.
//!
//! Each outer stage runs the base method for `N₀` iterations with the prox
//! function recentred at the previous output and rescaled to radius `R_k`.

use log::warn;

use crate::error::{check_len, Error, Result};
use crate::geometry::{Prox, ProxSetup, ShiftedProx};
use crate::oracle::GradientOracle;
use crate::rng::DirRng;

use super::{Algorithm, ArddState, Recorder, RddState, RunOptions, RunRecord};

/// Largest batch size a restart stage may request.
const MAX_BATCH: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acceleration {
    Accelerated,
    NonAccelerated,
}

impl Acceleration {
    /// Default inner-iteration constant `a`: `384 n² ρₙ` or `384 n ρₙ`.
    pub fn default_constant(self, n: usize, rho: f64) -> f64 {
        let n = n as f64;
        match self {
            Acceleration::Accelerated => 384.0 * n * n * rho,
            Acceleration::NonAccelerated => 384.0 * n * rho,
        }
    }

    /// Batch constant `b`: `4/n` or `2`.
    pub fn batch_constant(self, n: usize) -> f64 {
        match self {
            Acceleration::Accelerated => 4.0 / n as f64,
            Acceleration::NonAccelerated => 2.0,
        }
    }

    pub fn algorithm(self) -> Algorithm {
        match self {
            Acceleration::Accelerated => Algorithm::Arddsc,
            Acceleration::NonAccelerated => Algorithm::Rddsc,
        }
    }
}

/// Inner iterations per stage: `⌈√(8aL₂Ω/μ)⌉` accelerated, `⌈8aL₂Ω/μ⌉` otherwise.
pub fn restart_inner_iterations(acc: Acceleration, a: f64, lipschitz: f64, omega: f64, mu: f64) -> u64 {
    let r = 8.0 * a * lipschitz * omega / mu;
    let v = match acc {
        Acceleration::Accelerated => r.sqrt(),
        Acceleration::NonAccelerated => r,
    };
    v.ceil().max(1.0) as u64
}

/// Batch size for stage `k`, at least one.
#[allow(clippy::too_many_arguments)]
pub fn restart_batch_size(
    acc: Acceleration,
    n: usize,
    sigma_sq: f64,
    inner: u64,
    k: u32,
    lipschitz: f64,
    mu: f64,
    radius_sq: f64,
) -> f64 {
    let b = acc.batch_constant(n);
    let scale = match acc {
        Acceleration::Accelerated => inner as f64,
        Acceleration::NonAccelerated => 1.0,
    };
    let v = 8.0 * b * sigma_sq * scale * 2f64.powi(k as i32) / (lipschitz * mu * radius_sq);
    v.ceil().max(1.0)
}

/// `R_k² = R_p² 2^{−k} + (4Δ/μ)(1 − 2^{−k})`.
pub fn radius_sq(initial_sq: f64, delta: f64, mu: f64, k: u32) -> f64 {
    let h = 0.5f64.powi(k as i32);
    initial_sq * h + 4.0 * delta / mu * (1.0 - h)
}

/// Noise floor `Δ` of one stage, given the oracle's noise levels.
#[allow(clippy::too_many_arguments)]
pub fn theoretical_delta(
    acc: Acceleration,
    n: usize,
    rho: f64,
    lipschitz: f64,
    radius_sq: f64,
    omega: f64,
    inner: u64,
    delta_zeta: f64,
    delta_eta: f64,
) -> f64 {
    let nf = n as f64;
    let n0 = inner as f64;
    let s = delta_zeta.sqrt() / 2.0 + 2.0 * delta_eta;
    let root = (2.0 * nf * radius_sq * omega).sqrt();
    match acc {
        Acceleration::Accelerated => {
            61.0 * n0 * delta_zeta / (24.0 * lipschitz)
                + 122.0 * n0 * delta_eta * delta_eta / (3.0 * lipschitz)
                + 12.0 * root * s / (n0 * n0)
                + n0 * n0 * s * s / (12.0 * nf * rho * lipschitz)
        }
        Acceleration::NonAccelerated => {
            nf * delta_zeta / (12.0 * lipschitz)
                + 4.0 * nf * delta_eta * delta_eta / (3.0 * lipschitz)
                + 8.0 * root * s / n0
                + n0 * s * s / (3.0 * lipschitz * rho)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartParams {
    /// `R_p`, an upper bound on `‖x₀ − x*‖_p`.
    pub radius: f64,
    /// Number of outer stages `K`.
    pub outer: u32,
    /// Override for the inner-iteration constant `a`.
    pub constant_a: Option<f64>,
    /// Override for the per-stage noise floor `Δ`.
    pub delta: Option<f64>,
}

impl RestartParams {
    pub fn new(radius: f64, outer: u32) -> Self {
        RestartParams {
            radius,
            outer,
            constant_a: None,
            delta: None,
        }
    }
}

/// Outer-loop state.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartState {
    pub u: Vec<f64>,
    /// Completed stages.
    pub k: u32,
    /// `R_k²` for the next stage.
    pub r_sq: f64,
    pub inner: u64,
    pub oracle_calls: u64,
}

/// Restarted accelerated method; returns `u_K`.
pub fn run_arddsc(
    oracle: &dyn GradientOracle,
    base: &ProxSetup,
    x0: &[f64],
    params: &RestartParams,
    rng: &mut DirRng,
    options: RunOptions,
) -> Result<(Vec<f64>, RunRecord)> {
    run_restarted(Acceleration::Accelerated, oracle, base, x0, params, rng, options)
}

/// Restarted non-accelerated method; returns `u_K`.
pub fn run_rddsc(
    oracle: &dyn GradientOracle,
    base: &ProxSetup,
    x0: &[f64],
    params: &RestartParams,
    rng: &mut DirRng,
    options: RunOptions,
) -> Result<(Vec<f64>, RunRecord)> {
    run_restarted(Acceleration::NonAccelerated, oracle, base, x0, params, rng, options)
}

fn run_restarted(
    acc: Acceleration,
    oracle: &dyn GradientOracle,
    base: &ProxSetup,
    x0: &[f64],
    params: &RestartParams,
    rng: &mut DirRng,
    options: RunOptions,
) -> Result<(Vec<f64>, RunRecord)> {
    let info = oracle.info();
    let n = base.n();
    check_len(info.dim(), x0.len())?;
    check_len(n, x0.len())?;
    let lipschitz = info.lipschitz();
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return Err(Error::invalid("L2", format!("Lipschitz constant must be positive, got {lipschitz}")));
    }
    let mu = info.strong_convexity(base.p());
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::invalid("mu", format!("restarts need a positive strong convexity constant, got {mu}")));
    }
    if !(params.radius > 0.0) || !params.radius.is_finite() {
        return Err(Error::invalid("R", format!("radius must be positive, got {}", params.radius)));
    }
    let rho = base.rho();
    let omega = base.omega();
    let a = params.constant_a.unwrap_or_else(|| acc.default_constant(n, rho));
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::invalid("a", format!("inner-iteration constant must be positive, got {a}")));
    }
    let inner = restart_inner_iterations(acc, a, lipschitz, omega, mu);
    let r0_sq = params.radius * params.radius;
    let (dz, de) = oracle.noise_levels();
    let delta = match params.delta {
        Some(d) if d >= 0.0 && d.is_finite() => d,
        Some(d) => return Err(Error::invalid("delta", format!("noise floor must be non-negative, got {d}"))),
        None => {
            let d = theoretical_delta(acc, n, rho, lipschitz, r0_sq, omega, inner, dz, de);
            if !d.is_finite() {
                warn!("noise floor is not finite; using 0 for the radius schedule");
                0.0
            } else {
                d
            }
        }
    };
    let sigma_sq = info.sigma_sq();

    let mut record = RunRecord::new(acc.algorithm());
    record.echo("n", n);
    record.echo("p", base.p().index());
    record.echo("rho_n", rho);
    record.echo("omega", omega);
    record.echo("L2", lipschitz);
    record.echo("mu", mu);
    record.echo("R", params.radius);
    record.echo("K", params.outer);
    record.echo("a", a);
    record.echo("N0", inner);
    record.echo("delta", delta);
    record.echo("delta_zeta", dz);
    record.echo("delta_eta", de);

    let mut rec = Recorder::new(info, options, params.outer as u64);
    rec.record(0, 0, x0);
    let mut state = RestartState {
        u: x0.to_vec(),
        k: 0,
        r_sq: r0_sq,
        inner,
        oracle_calls: 0,
    };
    let mut batches = Vec::with_capacity(params.outer as usize);
    while state.k < params.outer {
        let k = state.k;
        state.r_sq = radius_sq(r0_sq, delta, mu, k);
        let m = restart_batch_size(acc, n, sigma_sq, inner, k, lipschitz, mu, r0_sq);
        if m > MAX_BATCH {
            return Err(Error::invalid("m_k", format!("stage {k} would need a batch of {m:.3e} samples")));
        }
        let m = m as usize;
        batches.push(m);
        let prox = ShiftedProx::new(base.clone(), state.u.clone(), state.r_sq.sqrt())?;
        state.u = match acc {
            Acceleration::Accelerated => {
                let mut s = ArddState::new(&state.u, rho, lipschitz);
                for _ in 0..inner {
                    s.step(oracle, &prox as &dyn Prox, m, rng)?;
                }
                s.y
            }
            Acceleration::NonAccelerated => {
                let mut s = RddState::new(&state.u, rho, lipschitz);
                for _ in 0..inner {
                    s.step(oracle, &prox as &dyn Prox, m, rng)?;
                }
                s.average()
            }
        };
        state.oracle_calls += inner * m as u64;
        state.k += 1;
        if rec.wants(state.k as u64) {
            rec.record(state.k as u64, state.oracle_calls, &state.u);
        }
    }
    record.echo("m_k", batches);
    record.rows = rec.rows;
    record.output = state.u.clone();
    Ok((state.u, record))
}
