use crate::error::{check_len, Result};
use crate::geometry::Prox;
use crate::oracle::{GradientEstimate, GradientOracle};
use crate::rng::DirRng;

use super::{check_run_args, Algorithm, Recorder, RunOptions, RunRecord};

/// Iterate and running average of the non-accelerated method.
#[derive(Debug, Clone, PartialEq)]
pub struct RddState {
    pub x: Vec<f64>,
    /// `Σ_{j<k} x_j`
    pub running_sum: Vec<f64>,
    /// Constant step `α = 1/(48 n ρₙ L₂)`.
    pub alpha: f64,
    pub k: u64,
    pub oracle_calls: u64,
}

impl RddState {
    pub fn new(x0: &[f64], rho: f64, lipschitz: f64) -> Self {
        RddState {
            x: x0.to_vec(),
            running_sum: vec![0.0; x0.len()],
            alpha: Self::step_size(x0.len(), rho, lipschitz),
            k: 0,
            oracle_calls: 0,
        }
    }

    pub fn step_size(n: usize, rho: f64, lipschitz: f64) -> f64 {
        1.0 / (48.0 * n as f64 * rho * lipschitz)
    }

    pub fn step(
        &mut self,
        oracle: &dyn GradientOracle,
        prox: &dyn Prox,
        m: usize,
        rng: &mut DirRng,
    ) -> Result<GradientEstimate> {
        for (s, v) in self.running_sum.iter_mut().zip(&self.x) {
            *s += v;
        }
        let est = oracle.estimate(&self.x, m, rng)?;
        self.x = prox.mirror_step(&self.x, &est.vector, self.alpha * self.x.len() as f64)?;
        self.k += 1;
        self.oracle_calls += est.oracle_calls;
        Ok(est)
    }

    /// `x̄_k = (1/k) Σ_{j<k} x_j`; the current iterate before the first step.
    pub fn average(&self) -> Vec<f64> {
        if self.k == 0 {
            return self.x.clone();
        }
        let k = self.k as f64;
        self.running_sum.iter().map(|s| s / k).collect()
    }
}

/// Runs `iterations` steps of the non-accelerated method and returns the
/// average of the iterates `x_0, …, x_{N−1}`.
pub fn run_rdd(
    oracle: &dyn GradientOracle,
    prox: &dyn Prox,
    x0: &[f64],
    iterations: u64,
    m: usize,
    rng: &mut DirRng,
    options: RunOptions,
) -> Result<(Vec<f64>, RunRecord)> {
    let info = oracle.info();
    check_len(info.dim(), x0.len())?;
    check_len(prox.dim(), x0.len())?;
    check_run_args(iterations, m, info.lipschitz())?;
    let setup = prox.setup();
    let rho = setup.rho();

    let mut record = RunRecord::new(Algorithm::Rdd);
    record.echo("n", setup.n());
    record.echo("p", setup.p().index());
    record.echo("rho_n", rho);
    record.echo("L2", info.lipschitz());
    record.echo("N", iterations);
    record.echo("m", m);
    let (dz, de) = oracle.noise_levels();
    record.echo("delta_zeta", dz);
    record.echo("delta_eta", de);

    let mut rec = Recorder::new(info, options, iterations);
    let mut state = RddState::new(x0, rho, info.lipschitz());
    record.echo("alpha", state.alpha);
    rec.record(0, 0, x0);
    while state.k < iterations {
        state.step(oracle, prox, m, rng)?;
        if rec.wants(state.k) {
            rec.record(state.k, state.oracle_calls, &state.average());
        }
    }
    let out = state.average();
    record.rows = rec.rows;
    record.output = out.clone();
    Ok((out, record))
}
