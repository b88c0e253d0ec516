//! Turns a validated config into an objective, an oracle, a prox setup and
//! concrete run parameters.

use dirgrad_core::algorithms::{
    run_ardd, run_arddsc, run_rdd, run_rddsc, Algorithm, RestartParams, RunOptions, RunRecord,
};
use dirgrad_core::geometry::{norm, PNorm, Prox, ProxSetup};
use dirgrad_core::oracle::{
    implied_noise_levels, make_quadratic, DirectionalOracle, FiniteDifferenceOracle, GradientOracle, NoiseModel,
    ObjectiveInfo, QuadraticObjective, QuadraticSpec,
};
use dirgrad_core::planner::{
    bound_rhs, plan_ardd, plan_arddsc, plan_rdd, plan_rddsc, BoundParams, Plan, Theorem,
};
use dirgrad_core::rng::seeded;
use log::warn;

use crate::config::{ExperimentConfig, OracleConfig, ProblemConfig};
use crate::CliError;

/// Iteration counts a run will use.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Plain { iterations: u64, m: usize },
    Restart(RestartParams),
}

pub struct Experiment {
    pub config: ExperimentConfig,
    /// The objective with its ground truth, whether or not it is exposed.
    truth: QuadraticObjective,
    /// What the optimizers see.
    pub objective: QuadraticObjective,
    pub setup: ProxSetup,
    pub x0: Vec<f64>,
    pub plan: Option<Plan>,
    pub schedule: Schedule,
    hidden: bool,
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, CliError> {
        let ProblemConfig::Quadratic {
            n,
            spectrum,
            sigma_sq,
            mu,
            sparse_solution,
            x_star,
            f_star,
            seed,
            hide_ground_truth,
        } = &config.problem;
        let spec = QuadraticSpec {
            n: *n,
            spectrum: spectrum.clone(),
            sigma_sq: *sigma_sq,
            mu: *mu,
            sparse_solution: *sparse_solution,
            x_star: x_star.clone(),
            f_star: *f_star,
        };
        let truth = make_quadratic(&spec, &mut seeded(*seed)).map_err(config_err)?;
        let objective = if *hide_ground_truth {
            truth.clone().without_ground_truth()
        } else {
            truth.clone()
        };
        let p = PNorm::from_index(config.geometry.p).map_err(config_err)?;
        let setup = ProxSetup::new(p, *n).map_err(config_err)?;
        let x0 = config.x0.clone().unwrap_or_else(|| vec![0.0; *n]);
        let mut exp = Experiment {
            truth,
            objective,
            setup,
            x0,
            plan: None,
            schedule: Schedule::Plain { iterations: 1, m: 1 },
            hidden: *hide_ground_truth,
            config,
        };
        exp.resolve()?;
        Ok(exp)
    }

    fn x_star(&self) -> Option<&[f64]> {
        if self.hidden {
            None
        } else {
            self.truth.x_star()
        }
    }

    /// `V[x₀](x*)` under the configured prox.
    pub fn theta(&self) -> Option<f64> {
        let xs = self.x_star()?;
        self.setup.bregman(&self.x0, xs).ok()
    }

    /// `‖x₀ − x*‖_p`.
    pub fn initial_distance(&self) -> Option<f64> {
        let xs = self.x_star()?;
        let d: Vec<f64> = self.x0.iter().zip(xs).map(|(a, b)| a - b).collect();
        norm(&d, self.setup.p().primal()).ok()
    }

    /// `(Δ_ζ, Δ_η)` of the configured oracle.
    pub fn noise_levels(&self) -> Result<(f64, f64), CliError> {
        match self.config.oracle {
            OracleConfig::Directional { delta_zeta, delta_eta } => Ok((delta_zeta, delta_eta)),
            OracleConfig::FiniteDifference { t, delta } => {
                implied_noise_levels(t, self.objective.lipschitz(), delta).map_err(config_err)
            }
        }
    }

    fn resolve(&mut self) -> Result<(), CliError> {
        let alg = self.config.algorithm;
        if let Some(req) = self.config.plan.clone() {
            let lipschitz = self.objective.lipschitz();
            let sigma_sq = self.objective.sigma_sq();
            let plan = if alg.is_restart() {
                let mu = self.objective.strong_convexity(self.setup.p());
                let radius = req.radius.or_else(|| self.initial_distance()).ok_or_else(|| {
                    CliError::Config("plan.R is required when the ground truth is hidden".into())
                })?;
                let f = if alg == Algorithm::Arddsc { plan_arddsc } else { plan_rddsc };
                f(req.epsilon, &self.setup, lipschitz, sigma_sq, mu, radius, req.a).map_err(config_err)?
            } else {
                let theta = req.theta.or_else(|| self.theta()).ok_or_else(|| {
                    CliError::Config("plan.theta is required when the ground truth is hidden".into())
                })?;
                let f = if alg == Algorithm::Ardd { plan_ardd } else { plan_rdd };
                f(req.epsilon, &self.setup, lipschitz, sigma_sq, theta).map_err(config_err)?
            };
            let (dz, de) = self.noise_levels()?;
            if dz > plan.delta_zeta || de > plan.delta_eta {
                warn!(
                    "oracle noise ({dz:e}, {de:e}) exceeds the plan's allowance ({:e}, {:e})",
                    plan.delta_zeta, plan.delta_eta
                );
            }
            self.schedule = if alg.is_restart() {
                let mut params = RestartParams::new(plan.inputs.radius.unwrap_or(1.0), plan.outer.unwrap_or(0));
                params.constant_a = plan.constant_a;
                Schedule::Restart(params)
            } else {
                Schedule::Plain {
                    iterations: plan.iterations,
                    m: usize::try_from(plan.m).map_err(|_| CliError::Config("planned batch size is too large".into()))?,
                }
            };
            self.plan = Some(plan);
        } else {
            let p = self.config.parameters.clone().unwrap_or_default();
            self.schedule = if alg.is_restart() {
                let radius = p.radius.or_else(|| self.initial_distance()).ok_or_else(|| {
                    CliError::Config("parameters.R is required when the ground truth is hidden".into())
                })?;
                if !(radius > 0.0) {
                    return Err(CliError::Config("x0 is the minimizer; parameters.R must be given".into()));
                }
                let mut params = RestartParams::new(radius, p.outer.unwrap_or(0));
                params.constant_a = p.a;
                params.delta = p.delta;
                Schedule::Restart(params)
            } else {
                Schedule::Plain {
                    iterations: p.iterations.unwrap_or(1),
                    m: p.m.unwrap_or(1),
                }
            };
        }
        Ok(())
    }

    /// Replaces `N` of a non-restarted schedule.
    pub fn set_iterations(&mut self, n: u64) -> Result<(), CliError> {
        match &mut self.schedule {
            Schedule::Plain { iterations, .. } => {
                *iterations = n;
                Ok(())
            }
            Schedule::Restart(_) => Err(CliError::Config(format!(
                "{} has no iteration count to sweep",
                self.config.algorithm
            ))),
        }
    }

    /// Runs one seed.
    pub fn run(&self, seed: u64, options: RunOptions) -> Result<RunRecord, CliError> {
        let mut rng = seeded(seed);
        let (_, record) = match self.config.oracle {
            OracleConfig::Directional { delta_zeta, delta_eta } => {
                let noise = NoiseModel::new(delta_zeta, delta_eta).map_err(config_err)?;
                self.dispatch(&DirectionalOracle::new(&self.objective, noise), &mut rng, options)
            }
            OracleConfig::FiniteDifference { t, delta } => {
                let oracle = FiniteDifferenceOracle::new(&self.objective, t, delta).map_err(config_err)?;
                self.dispatch(&oracle, &mut rng, options)
            }
        }
        .map_err(|e| CliError::Runtime(format!("seed {seed}: {e}")))?;
        Ok(record.with_seed(seed))
    }

    fn dispatch(
        &self,
        oracle: &dyn GradientOracle,
        rng: &mut dirgrad_core::rng::DirRng,
        options: RunOptions,
    ) -> dirgrad_core::Result<(Vec<f64>, RunRecord)> {
        match (&self.schedule, self.config.algorithm) {
            (Schedule::Plain { iterations, m }, Algorithm::Ardd) => {
                run_ardd(oracle, &self.setup, &self.x0, *iterations, *m, rng, options)
            }
            (Schedule::Plain { iterations, m }, Algorithm::Rdd) => {
                run_rdd(oracle, &self.setup, &self.x0, *iterations, *m, rng, options)
            }
            (Schedule::Restart(params), Algorithm::Arddsc) => {
                run_arddsc(oracle, &self.setup, &self.x0, params, rng, options)
            }
            (Schedule::Restart(params), Algorithm::Rddsc) => {
                run_rddsc(oracle, &self.setup, &self.x0, params, rng, options)
            }
            _ => unreachable!("schedule matches the algorithm"),
        }
    }

    /// Bound inputs for the configured algorithm. `record` supplies the
    /// noise floor actually used by restarted runs. `None` when a needed
    /// quantity depends on hidden ground truth.
    pub fn bound_params(&self, record: &RunRecord) -> Result<Option<BoundParams>, CliError> {
        let (dz, de) = self.noise_levels()?;
        let mut b = BoundParams {
            n: Some(self.setup.n()),
            rho: Some(self.setup.rho()),
            lipschitz: Some(self.objective.lipschitz()),
            sigma_sq: Some(self.objective.sigma_sq()),
            omega: Some(self.setup.omega()),
            delta_zeta: Some(dz),
            delta_eta: Some(de),
            ..BoundParams::default()
        };
        match &self.schedule {
            Schedule::Plain { iterations, m } => {
                let theta = self.config.plan.as_ref().and_then(|p| p.theta).or_else(|| self.theta());
                let Some(theta) = theta else { return Ok(None) };
                b.theta = Some(theta);
                b.iterations = Some(*iterations);
                b.m = Some(*m as u64);
            }
            Schedule::Restart(params) => {
                b.mu = Some(self.objective.strong_convexity(self.setup.p()));
                b.radius = Some(params.radius);
                b.outer = Some(params.outer);
                b.inner = record.params.get("N0").and_then(|v| v.as_u64());
                b.delta = record.params.get("delta").and_then(|v| v.as_f64());
            }
        }
        Ok(Some(b))
    }

    pub fn bound(&self, record: &RunRecord) -> Result<Option<f64>, CliError> {
        let Some(params) = self.bound_params(record)? else {
            return Ok(None);
        };
        bound_rhs(Theorem::for_algorithm(self.config.algorithm), &params)
            .map(Some)
            .map_err(|e| CliError::Runtime(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn config(alg: &str, params: &str) -> ExperimentConfig {
        parse_config(&format!(
            r#"{{
  "problem": {{ "kind": "quadratic", "n": 8, "spectrum": {{ "kind": "ones" }}, "mu": 1.0, "seed": 3 }},
  "geometry": {{ "p": 2 }},
  "algorithm": "{alg}",
  {params},
  "seeds": [1]
}}"#
        ))
        .unwrap()
    }

    #[test]
    fn explicit_parameters() {
        let exp = Experiment::new(config("rdd", r#""parameters": { "N": 20, "m": 2 }"#)).unwrap();
        assert_eq!(exp.schedule, Schedule::Plain { iterations: 20, m: 2 });
        let rec = exp.run(5, RunOptions::default()).unwrap();
        assert_eq!(rec.total_oracle_calls(), 40);
        assert_eq!(rec.seed, Some(5));
        assert!(exp.bound(&rec).unwrap().unwrap() > 0.0);
    }

    #[test]
    fn plan_fills_schedule() {
        let exp = Experiment::new(config("ardd", r#""plan": { "epsilon": 0.1 }"#)).unwrap();
        let plan = exp.plan.as_ref().unwrap();
        assert_eq!(exp.schedule, Schedule::Plain { iterations: plan.iterations, m: 1 });
        assert_eq!(plan.inputs.theta, exp.theta());
    }

    #[test]
    fn restart_radius_defaults_to_distance() {
        let exp = Experiment::new(config("arddsc", r#""parameters": { "K": 1, "a": 1.0 }"#)).unwrap();
        let Schedule::Restart(p) = &exp.schedule else { panic!() };
        assert_eq!(Some(p.radius), exp.initial_distance());
        let rec = exp.run(1, RunOptions::default()).unwrap();
        let b = exp.bound_params(&rec).unwrap().unwrap();
        assert!(b.delta.is_some() && b.inner.is_some());
    }

    #[test]
    fn hidden_truth_drops_the_bound() {
        let mut cfg = config("ardd", r#""parameters": { "N": 5 }"#);
        let ProblemConfig::Quadratic { hide_ground_truth, .. } = &mut cfg.problem;
        *hide_ground_truth = true;
        let exp = Experiment::new(cfg).unwrap();
        let rec = exp.run(1, RunOptions::default()).unwrap();
        assert_eq!(rec.final_gap(), None);
        assert_eq!(exp.bound(&rec).unwrap(), None);
    }

    #[test]
    fn finite_difference_noise_levels() {
        let mut cfg = config("ardd", r#""parameters": { "N": 5 }"#);
        cfg.oracle = OracleConfig::FiniteDifference { t: 0.1, delta: 1e-4 };
        let exp = Experiment::new(cfg).unwrap();
        let (dz, de) = exp.noise_levels().unwrap();
        assert_eq!(de, 2e-4 / 0.1);
        assert!((dz - 0.0025).abs() < 1e-15);
    }
}
