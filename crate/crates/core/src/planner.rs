//! Parameter selection for a target accuracy and evaluable right-hand sides
//! of the four convergence bounds.
//!
//! Plans split `ε` evenly over the additive terms of the bound: `ε/6` per
//! term for the non-restarted methods; for the restarted ones `ε/2` goes to
//! the geometric term and `ε/2` to the floor `2Δ`, i.e. `ε/16` per term of `Δ`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::algorithms::{
    restart_batch_size, restart_inner_iterations, theoretical_delta, Acceleration, Algorithm,
};
use crate::error::{Error, Result};
use crate::geometry::ProxSetup;

/// Noise allowances are scaled by this factor so rounding in the bound
/// evaluation cannot push a plan past `ε`.
const ALLOWANCE_SHRINK: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub n: usize,
    pub p: u32,
    /// Iterations `N`; for restarted methods the inner count `N₀`.
    #[serde(rename = "N")]
    pub iterations: u64,
    /// Batch size `m`; for restarted methods the largest `m_k`.
    pub m: u64,
    /// Largest admissible `Δ_ζ`.
    pub delta_zeta: f64,
    /// Largest admissible `Δ_η`.
    pub delta_eta: f64,
    pub oracle_calls: u64,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_schedule: Option<Vec<u64>>,
    /// Inner-iteration constant `a` used for `N₀`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant_a: Option<f64>,
    /// Noise floor `Δ` at the admissible noise levels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub inputs: BoundParams,
}

impl Plan {
    /// Bound evaluated at the plan's own parameters.
    pub fn bound(&self) -> Result<f64> {
        bound_rhs(Theorem::for_algorithm(self.algorithm), &self.inputs)
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut rows: Vec<(&str, String)> = vec![
            ("algorithm", self.algorithm.to_string()),
            ("epsilon", format!("{:e}", self.epsilon)),
            ("n", self.n.to_string()),
            ("p", self.p.to_string()),
        ];
        if let Some(k) = self.outer {
            rows.push(("K", k.to_string()));
            rows.push(("N0", self.iterations.to_string()));
            rows.push(("max m_k", self.m.to_string()));
        } else {
            rows.push(("N", self.iterations.to_string()));
            rows.push(("m", self.m.to_string()));
        }
        rows.push(("delta_zeta <=", format!("{:e}", self.delta_zeta)));
        rows.push(("delta_eta <=", format!("{:e}", self.delta_eta)));
        if let Some(d) = self.delta {
            rows.push(("Delta", format!("{d:e}")));
        }
        if let Some(a) = self.constant_a {
            rows.push(("a", format!("{a}")));
        }
        rows.push(("oracle calls", self.oracle_calls.to_string()));
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in rows {
            writeln!(f, "{k:<width$}  {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    /// Accelerated method.
    One,
    /// Non-accelerated method.
    Two,
    /// Restarted accelerated method.
    Three,
    /// Restarted non-accelerated method.
    Four,
}

impl Theorem {
    pub fn from_index(i: u32) -> Result<Self> {
        match i {
            1 => Ok(Theorem::One),
            2 => Ok(Theorem::Two),
            3 => Ok(Theorem::Three),
            4 => Ok(Theorem::Four),
            _ => Err(Error::invalid("theorem", format!("expected 1, 2, 3 or 4, got {i}"))),
        }
    }

    pub fn for_algorithm(a: Algorithm) -> Self {
        match a {
            Algorithm::Ardd => Theorem::One,
            Algorithm::Rdd => Theorem::Two,
            Algorithm::Arddsc => Theorem::Three,
            Algorithm::Rddsc => Theorem::Four,
        }
    }
}

/// Inputs of [`bound_rhs`]; each theorem reads the subset it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(rename = "L2", default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<u32>,
    #[serde(rename = "N0", default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_eta: Option<f64>,
    /// Precomputed `Δ`; otherwise derived from the noise levels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

fn need<T: Copy>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or(Error::MissingParameter(name))
}

/// `s = √Δ_ζ/2 + 2Δ_η`
fn noise_scale(dz: f64, de: f64) -> f64 {
    dz.sqrt() / 2.0 + 2.0 * de
}

/// Right-hand side of the named convergence bound.
pub fn bound_rhs(theorem: Theorem, p: &BoundParams) -> Result<f64> {
    match theorem {
        Theorem::One | Theorem::Two => {
            let n = need(p.n, "n")? as f64;
            let rho = need(p.rho, "rho")?;
            let l = need(p.lipschitz, "L2")?;
            let sigma_sq = need(p.sigma_sq, "sigma_sq")?;
            let theta = need(p.theta, "theta")?;
            let big_n = need(p.iterations, "N")? as f64;
            let m = need(p.m, "m")? as f64;
            let dz = need(p.delta_zeta, "delta_zeta")?;
            let de = need(p.delta_eta, "delta_eta")?;
            let s = noise_scale(dz, de);
            let root = (2.0 * n * theta).sqrt();
            Ok(if theorem == Theorem::One {
                384.0 * theta * n * n * rho * l / (big_n * big_n)
                    + 4.0 * big_n * sigma_sq / (n * l * m)
                    + 61.0 * big_n * dz / (24.0 * l)
                    + 122.0 * big_n * de * de / (3.0 * l)
                    + 12.0 * root / (big_n * big_n) * s
                    + big_n * big_n * s * s / (12.0 * n * rho * l)
            } else {
                384.0 * n * rho * l * theta / big_n
                    + 2.0 * sigma_sq / (l * m)
                    + n * dz / (12.0 * l)
                    + 4.0 * n * de * de / (3.0 * l)
                    + 8.0 * root * s / big_n
                    + big_n * s * s / (3.0 * l * rho)
            })
        }
        Theorem::Three | Theorem::Four => {
            let mu = need(p.mu, "mu")?;
            let r = need(p.radius, "R")?;
            let k = need(p.outer, "K")?;
            let delta = match p.delta {
                Some(d) => d,
                None => {
                    let acc = if theorem == Theorem::Three {
                        Acceleration::Accelerated
                    } else {
                        Acceleration::NonAccelerated
                    };
                    theoretical_delta(
                        acc,
                        need(p.n, "n")?,
                        need(p.rho, "rho")?,
                        need(p.lipschitz, "L2")?,
                        r * r,
                        need(p.omega, "omega")?,
                        need(p.inner, "N0")?,
                        need(p.delta_zeta, "delta_zeta")?,
                        need(p.delta_eta, "delta_eta")?,
                    )
                }
            };
            Ok(mu * r * r / 2.0 * 0.5f64.powi(k as i32) + 2.0 * delta)
        }
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_sigma(sigma_sq: f64) -> Result<()> {
    if !(sigma_sq >= 0.0) || !sigma_sq.is_finite() {
        return Err(Error::invalid("sigma_sq", format!("must be non-negative, got {sigma_sq}")));
    }
    Ok(())
}

fn to_count(name: &'static str, v: f64) -> Result<u64> {
    if !v.is_finite() || v >= u64::MAX as f64 {
        return Err(Error::invalid(name, format!("planned value {v:e} does not fit a 64-bit count")));
    }
    Ok(v.ceil().max(1.0) as u64)
}

/// Plan for the accelerated method with `Θ_p = V[x₀](x*)`.
pub fn plan_ardd(eps: f64, setup: &ProxSetup, lipschitz: f64, sigma_sq: f64, theta: f64) -> Result<Plan> {
    check_positive("epsilon", eps)?;
    check_positive("L2", lipschitz)?;
    check_positive("theta", theta)?;
    check_sigma(sigma_sq)?;
    let n = setup.n() as f64;
    let rho = setup.rho();
    let big_n = to_count("N", (2304.0 * theta * n * n * rho * lipschitz / eps).sqrt())?;
    let nf = big_n as f64;
    let m = to_count("m", 24.0 * nf * sigma_sq / (n * lipschitz * eps))?;
    let s_max = (eps * nf * nf / (72.0 * (2.0 * n * theta).sqrt())).min((2.0 * n * rho * lipschitz * eps).sqrt() / nf);
    let dz = (4.0 * lipschitz * eps / (61.0 * nf)).min(s_max * s_max) * ALLOWANCE_SHRINK;
    let de = (lipschitz * eps / (244.0 * nf)).sqrt().min(s_max / 4.0) * ALLOWANCE_SHRINK;
    finish_plain(Algorithm::Ardd, eps, setup, lipschitz, sigma_sq, theta, big_n, m, dz, de)
}

/// Plan for the non-accelerated method.
pub fn plan_rdd(eps: f64, setup: &ProxSetup, lipschitz: f64, sigma_sq: f64, theta: f64) -> Result<Plan> {
    check_positive("epsilon", eps)?;
    check_positive("L2", lipschitz)?;
    check_positive("theta", theta)?;
    check_sigma(sigma_sq)?;
    let n = setup.n() as f64;
    let rho = setup.rho();
    let big_n = to_count("N", 2304.0 * n * rho * lipschitz * theta / eps)?;
    let nf = big_n as f64;
    let m = to_count("m", 12.0 * sigma_sq / (eps * lipschitz))?;
    let s_max = (eps * nf / (48.0 * (2.0 * n * theta).sqrt())).min((lipschitz * rho * eps / (2.0 * nf)).sqrt());
    let dz = (2.0 * lipschitz * eps / n).min(s_max * s_max) * ALLOWANCE_SHRINK;
    let de = (lipschitz * eps / (8.0 * n)).sqrt().min(s_max / 4.0) * ALLOWANCE_SHRINK;
    finish_plain(Algorithm::Rdd, eps, setup, lipschitz, sigma_sq, theta, big_n, m, dz, de)
}

#[allow(clippy::too_many_arguments)]
fn finish_plain(
    algorithm: Algorithm,
    eps: f64,
    setup: &ProxSetup,
    lipschitz: f64,
    sigma_sq: f64,
    theta: f64,
    big_n: u64,
    m: u64,
    dz: f64,
    de: f64,
) -> Result<Plan> {
    let oracle_calls = big_n
        .checked_mul(m)
        .ok_or_else(|| Error::invalid("oracle_calls", "planned call count overflows"))?;
    Ok(Plan {
        algorithm,
        epsilon: eps,
        n: setup.n(),
        p: setup.p().index(),
        iterations: big_n,
        m,
        delta_zeta: dz,
        delta_eta: de,
        oracle_calls,
        outer: None,
        m_schedule: None,
        constant_a: None,
        delta: None,
        inputs: BoundParams {
            n: Some(setup.n()),
            rho: Some(setup.rho()),
            lipschitz: Some(lipschitz),
            sigma_sq: Some(sigma_sq),
            theta: Some(theta),
            iterations: Some(big_n),
            m: Some(m),
            delta_zeta: Some(dz),
            delta_eta: Some(de),
            ..BoundParams::default()
        },
    })
}

/// Number of restarts: `⌈log₂(μR²/ε)⌉`, or 0 when `ε ≥ μR²`.
pub fn restart_count(eps: f64, mu: f64, radius: f64) -> u32 {
    let ratio = mu * radius * radius / eps;
    if ratio <= 1.0 {
        return 0;
    }
    // Absorb rounding so exact powers of two are not bumped up by one.
    (ratio.log2() - 1e-12).ceil().max(0.0) as u32
}

/// Plan for the restarted accelerated method.
#[allow(clippy::too_many_arguments)]
pub fn plan_arddsc(
    eps: f64,
    setup: &ProxSetup,
    lipschitz: f64,
    sigma_sq: f64,
    mu: f64,
    radius: f64,
    constant_a: Option<f64>,
) -> Result<Plan> {
    plan_restarted(Acceleration::Accelerated, eps, setup, lipschitz, sigma_sq, mu, radius, constant_a)
}

/// Plan for the restarted non-accelerated method.
#[allow(clippy::too_many_arguments)]
pub fn plan_rddsc(
    eps: f64,
    setup: &ProxSetup,
    lipschitz: f64,
    sigma_sq: f64,
    mu: f64,
    radius: f64,
    constant_a: Option<f64>,
) -> Result<Plan> {
    plan_restarted(Acceleration::NonAccelerated, eps, setup, lipschitz, sigma_sq, mu, radius, constant_a)
}

#[allow(clippy::too_many_arguments)]
fn plan_restarted(
    acc: Acceleration,
    eps: f64,
    setup: &ProxSetup,
    lipschitz: f64,
    sigma_sq: f64,
    mu: f64,
    radius: f64,
    constant_a: Option<f64>,
) -> Result<Plan> {
    check_positive("epsilon", eps)?;
    check_positive("L2", lipschitz)?;
    check_positive("mu", mu)?;
    check_positive("R", radius)?;
    check_sigma(sigma_sq)?;
    let n = setup.n();
    let nf = n as f64;
    let rho = setup.rho();
    let omega = setup.omega();
    let a = constant_a.unwrap_or_else(|| acc.default_constant(n, rho));
    check_positive("a", a)?;
    let r_sq = radius * radius;
    let outer = restart_count(eps, mu, radius);
    let inner = restart_inner_iterations(acc, a, lipschitz, omega, mu);
    let n0 = inner as f64;
    let root = (2.0 * nf * r_sq * omega).sqrt();
    let (dz, de) = match acc {
        Acceleration::Accelerated => {
            let s_max = (eps * n0 * n0 / (192.0 * root)).min((3.0 * nf * rho * lipschitz * eps / 4.0).sqrt() / n0);
            (
                (3.0 * lipschitz * eps / (122.0 * n0)).min(s_max * s_max),
                (3.0 * lipschitz * eps / (1952.0 * n0)).sqrt().min(s_max / 4.0),
            )
        }
        Acceleration::NonAccelerated => {
            let s_max = (eps * n0 / (128.0 * root)).min((3.0 * lipschitz * rho * eps / (16.0 * n0)).sqrt());
            (
                (3.0 * lipschitz * eps / (4.0 * nf)).min(s_max * s_max),
                (3.0 * lipschitz * eps / (64.0 * nf)).sqrt().min(s_max / 4.0),
            )
        }
    };
    let (dz, de) = (dz * ALLOWANCE_SHRINK, de * ALLOWANCE_SHRINK);
    let delta = theoretical_delta(acc, n, rho, lipschitz, r_sq, omega, inner, dz, de);

    let mut schedule = Vec::with_capacity(outer as usize);
    let mut calls: u64 = 0;
    for k in 0..outer {
        let m = to_count("m_k", restart_batch_size(acc, n, sigma_sq, inner, k, lipschitz, mu, r_sq))?;
        calls = m
            .checked_mul(inner)
            .and_then(|c| calls.checked_add(c))
            .ok_or_else(|| Error::invalid("oracle_calls", "planned call count overflows"))?;
        schedule.push(m);
    }
    Ok(Plan {
        algorithm: acc.algorithm(),
        epsilon: eps,
        n,
        p: setup.p().index(),
        iterations: inner,
        m: schedule.iter().copied().max().unwrap_or(1),
        delta_zeta: dz,
        delta_eta: de,
        oracle_calls: calls,
        outer: Some(outer),
        m_schedule: Some(schedule),
        constant_a: Some(a),
        delta: Some(delta),
        inputs: BoundParams {
            n: Some(n),
            rho: Some(rho),
            lipschitz: Some(lipschitz),
            sigma_sq: Some(sigma_sq),
            omega: Some(omega),
            radius: Some(radius),
            mu: Some(mu),
            outer: Some(outer),
            inner: Some(inner),
            delta_zeta: Some(dz),
            delta_eta: Some(de),
            ..BoundParams::default()
        },
    })
}
