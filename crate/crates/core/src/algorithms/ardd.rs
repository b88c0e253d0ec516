use crate::error::{check_len, Result};
use crate::geometry::Prox;
use crate::oracle::{GradientEstimate, GradientOracle};
use crate::rng::DirRng;

use super::{check_run_args, Algorithm, Recorder, RunOptions, RunRecord};

/// Iterates of the accelerated method.
///
/// Each step extrapolates `x = τz + (1 − τ)y`, takes a Euclidean gradient
/// step `y ← x − ∇̃/(2L₂)` and a mirror step on `z` with coefficient `α·n`
/// in the configured prox geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ArddState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Number of completed iterations.
    pub k: u64,
    /// `α_{k+1}` used by the last step.
    pub alpha_next: f64,
    /// `τ_k` used by the last step.
    pub tau: f64,
    pub oracle_calls: u64,
    n: usize,
    rho: f64,
    lipschitz: f64,
}

impl ArddState {
    pub fn new(x0: &[f64], rho: f64, lipschitz: f64) -> Self {
        ArddState {
            x: x0.to_vec(),
            y: x0.to_vec(),
            z: x0.to_vec(),
            k: 0,
            alpha_next: 0.0,
            tau: 0.0,
            oracle_calls: 0,
            n: x0.len(),
            rho,
            lipschitz,
        }
    }

    /// `α_{k+1} = (k + 2)/(96 n² ρₙ L₂)`.
    pub fn alpha(k: u64, n: usize, rho: f64, lipschitz: f64) -> f64 {
        let n = n as f64;
        (k as f64 + 2.0) / (96.0 * n * n * rho * lipschitz)
    }

    /// `τ_k = 2/(k + 2)`.
    pub fn tau(k: u64) -> f64 {
        2.0 / (k as f64 + 2.0)
    }

    pub fn step(
        &mut self,
        oracle: &dyn GradientOracle,
        prox: &dyn Prox,
        m: usize,
        rng: &mut DirRng,
    ) -> Result<GradientEstimate> {
        self.alpha_next = Self::alpha(self.k, self.n, self.rho, self.lipschitz);
        self.tau = Self::tau(self.k);
        let tau = self.tau;
        for i in 0..self.n {
            self.x[i] = tau * self.z[i] + (1.0 - tau) * self.y[i];
        }
        let est = oracle.estimate(&self.x, m, rng)?;
        let h = 1.0 / (2.0 * self.lipschitz);
        for i in 0..self.n {
            self.y[i] = self.x[i] - h * est.vector[i];
        }
        self.z = prox.mirror_step(&self.z, &est.vector, self.alpha_next * self.n as f64)?;
        self.k += 1;
        self.oracle_calls += est.oracle_calls;
        Ok(est)
    }
}

/// Runs `iterations` steps of the accelerated method and returns `y_N`.
///
/// Rows of the record report `f(y_k) − f*`.
pub fn run_ardd(
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
    let lipschitz = info.lipschitz();

    let mut record = RunRecord::new(Algorithm::Ardd);
    record.echo("n", setup.n());
    record.echo("p", setup.p().index());
    record.echo("rho_n", rho);
    record.echo("L2", lipschitz);
    record.echo("N", iterations);
    record.echo("m", m);
    let (dz, de) = oracle.noise_levels();
    record.echo("delta_zeta", dz);
    record.echo("delta_eta", de);

    let mut rec = Recorder::new(info, options, iterations);
    let mut state = ArddState::new(x0, rho, lipschitz);
    rec.record(0, 0, &state.y);
    while state.k < iterations {
        state.step(oracle, prox, m, rng)?;
        if rec.wants(state.k) {
            rec.record(state.k, state.oracle_calls, &state.y);
        }
    }
    record.rows = rec.rows;
    record.output = state.y.clone();
    Ok((state.y, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PNorm, ProxSetup};
    use crate::oracle::{make_quadratic, DirectionalOracle, NoiseModel, ObjectiveInfo, QuadraticSpec, Spectrum};
    use crate::rng::seeded;

    fn problem(n: usize) -> crate::oracle::QuadraticObjective {
        let spec = QuadraticSpec::new(n, Spectrum::Linear { min: 0.1, max: 1.0 });
        make_quadratic(&spec, &mut seeded(42)).unwrap()
    }

    #[test]
    fn first_step_sizes() {
        let n = 8;
        let alpha = ArddState::alpha(0, n, 1.0, 1.0);
        assert_eq!(alpha, 1.0 / 3072.0);
        assert_eq!(ArddState::tau(0), 1.0);
    }

    #[test]
    fn first_extrapolate_is_start() {
        let f = problem(8);
        let oracle = DirectionalOracle::new(&f, NoiseModel::zero());
        let setup = ProxSetup::new(PNorm::Two, 8).unwrap();
        let x0 = vec![0.5; 8];
        let mut st = ArddState::new(&x0, setup.rho(), f.lipschitz());
        st.step(&oracle, &setup, 1, &mut seeded(1)).unwrap();
        assert_eq!(st.x, x0);
    }

    #[test]
    fn single_iteration_unrolled() {
        let f = problem(6);
        let oracle = DirectionalOracle::new(&f, NoiseModel::zero());
        let setup = ProxSetup::new(PNorm::Two, 6).unwrap();
        let x0 = vec![1.0, -1.0, 0.5, 0.0, 2.0, 0.1];
        let (y1, rec) = run_ardd(&oracle, &setup, &x0, 1, 3, &mut seeded(5), RunOptions::default()).unwrap();
        let est = oracle.estimate(&x0, 3, &mut seeded(5)).unwrap();
        for i in 0..6 {
            let expect = x0[i] - est.vector[i] / (2.0 * f.lipschitz());
            assert!((y1[i] - expect).abs() < 1e-15);
        }
        assert_eq!(rec.total_oracle_calls(), 3);
    }

    #[test]
    fn state_invariants_hold_every_iteration() {
        for p in [PNorm::One, PNorm::Two] {
            let f = problem(10);
            let noise = NoiseModel::new(1e-4, 1e-3).unwrap();
            let oracle = DirectionalOracle::new(&f, noise);
            let setup = ProxSetup::new(p, 10).unwrap();
            let mut st = ArddState::new(&[0.3; 10], setup.rho(), f.lipschitz());
            let mut rng = seeded(9);
            for k in 0..200u64 {
                let (y_prev, z_prev) = (st.y.clone(), st.z.clone());
                let est = st.step(&oracle, &setup, 2, &mut rng).unwrap();
                assert_eq!(st.alpha_next.to_bits(), ArddState::alpha(k, 10, setup.rho(), f.lipschitz()).to_bits());
                assert_eq!(st.tau.to_bits(), ArddState::tau(k).to_bits());
                let tau = st.tau;
                for i in 0..10 {
                    assert_eq!(st.x[i], tau * z_prev[i] + (1.0 - tau) * y_prev[i]);
                }
                // y − x is a multiple of the drawn direction.
                let d: Vec<f64> = st.y.iter().zip(&st.x).map(|(a, b)| a - b).collect();
                let c = crate::geometry::dot(&d, &est.direction);
                for i in 0..10 {
                    assert!((d[i] - c * est.direction[i]).abs() < 1e-14);
                }
                assert_eq!(st.oracle_calls, 2 * (k + 1));
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let f = problem(4);
        let oracle = DirectionalOracle::new(&f, NoiseModel::zero());
        let setup = ProxSetup::new(PNorm::Two, 4).unwrap();
        let mut rng = seeded(0);
        assert!(run_ardd(&oracle, &setup, &[0.0; 4], 0, 1, &mut rng, RunOptions::default()).is_err());
        assert!(run_ardd(&oracle, &setup, &[0.0; 4], 5, 0, &mut rng, RunOptions::default()).is_err());
        assert!(run_ardd(&oracle, &setup, &[0.0; 3], 5, 1, &mut rng, RunOptions::default()).is_err());
    }

    #[test]
    fn noiseless_run_decreases_gap() {
        let f = problem(8);
        let oracle = DirectionalOracle::new(&f, NoiseModel::zero());
        let setup = ProxSetup::new(PNorm::Two, 8).unwrap();
        let x0 = vec![0.0; 8];
        let (_, rec) = run_ardd(&oracle, &setup, &x0, 2000, 1, &mut seeded(3), RunOptions::default()).unwrap();
        assert!(rec.final_gap().unwrap() < 0.2 * rec.rows[0].f_gap.unwrap());
        assert_eq!(rec.rows.len(), 2001);
    }
}
