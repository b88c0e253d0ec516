//! Stochastic objectives, the noisy directional-derivative oracle, and the
//! rank-one gradient estimators built on top of it.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::geometry::{dot, norm, Norm, PNorm};
use crate::rng::DirRng;

/// Ground truth and smoothness data of an objective `f(x) = E_ξ F(x, ξ)`.
pub trait ObjectiveInfo: Send + Sync {
    fn dim(&self) -> usize;

    /// `L₂`, the Lipschitz constant of `∇f` (and `√E L(ξ)²`).
    fn lipschitz(&self) -> f64;

    /// `σ²`, the bound on `E‖g(x, ξ) − ∇f(x)‖₂²`.
    fn sigma_sq(&self) -> f64;

    /// `μ_p`, strong convexity w.r.t. `‖·‖_p`; 0 when merely convex.
    fn strong_convexity(&self, p: PNorm) -> f64;

    /// Noise-free `f(x)` when the objective can evaluate it.
    fn expected_value(&self, x: &[f64]) -> Option<f64>;

    /// `∇f(x)` when available (test objectives).
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>>;

    fn f_star(&self) -> Option<f64>;

    fn x_star(&self) -> Option<&[f64]>;

    fn suboptimality(&self, x: &[f64]) -> Option<f64> {
        Some(self.expected_value(x)? - self.f_star()?)
    }
}

/// Sampling and evaluation of `F(x, ξ)` and of `⟨g(x, ξ), e⟩`.
pub trait StochasticObjective: ObjectiveInfo {
    /// Length of the `ξ` vector; 0 for deterministic objectives.
    fn xi_dim(&self) -> usize;

    fn sample_xi_into(&self, rng: &mut DirRng, xi: &mut Vec<f64>);

    fn sample_xi(&self, rng: &mut DirRng) -> Vec<f64> {
        let mut xi = Vec::with_capacity(self.xi_dim());
        self.sample_xi_into(rng, &mut xi);
        xi
    }

    /// `F(x, ξ)`.
    fn value(&self, x: &[f64], xi: &[f64]) -> f64;

    /// `⟨g(x, ξ), e⟩`.
    fn dir_derivative(&self, x: &[f64], xi: &[f64], e: &[f64]) -> f64;

    /// `g(x, ξ)` when the objective exposes it (used only for checks).
    fn stochastic_gradient(&self, _x: &[f64], _xi: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Diagonal spectrum of a quadratic test problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spectrum {
    Ones,
    Linear { min: f64, max: f64 },
    LogUniform { min: f64, max: f64 },
    Explicit { values: Vec<f64> },
}

impl Spectrum {
    pub fn eigenvalues(&self, n: usize) -> Result<Vec<f64>> {
        let spread = |min: f64, max: f64| -> Result<()> {
            if !(min > 0.0 && max >= min && max.is_finite()) {
                return Err(Error::invalid(
                    "spectrum",
                    format!("need 0 < min <= max, got [{min}, {max}]"),
                ));
            }
            Ok(())
        };
        let values = match self {
            Spectrum::Ones => vec![1.0; n],
            Spectrum::Linear { min, max } => {
                spread(*min, *max)?;
                if n == 1 {
                    vec![*max]
                } else {
                    (0..n)
                        .map(|i| min + (max - min) * i as f64 / (n - 1) as f64)
                        .collect()
                }
            }
            Spectrum::LogUniform { min, max } => {
                spread(*min, *max)?;
                let (a, b) = (min.ln(), max.ln());
                if n == 1 {
                    vec![*max]
                } else {
                    (0..n)
                        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                        .collect()
                }
            }
            Spectrum::Explicit { values } => {
                check_len(n, values.len())?;
                if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return Err(Error::invalid("spectrum", "eigenvalues must be positive and finite"));
                }
                values.clone()
            }
        };
        Ok(values)
    }
}

/// Everything needed to build a [`QuadraticObjective`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSpec {
    pub n: usize,
    pub spectrum: Spectrum,
    #[serde(default)]
    pub sigma_sq: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub sparse_solution: bool,
    #[serde(default)]
    pub x_star: Option<Vec<f64>>,
    #[serde(default)]
    pub f_star: f64,
}

impl QuadraticSpec {
    pub fn new(n: usize, spectrum: Spectrum) -> Self {
        QuadraticSpec {
            n,
            spectrum,
            sigma_sq: 0.0,
            mu: 0.0,
            sparse_solution: false,
            x_star: None,
            f_star: 0.0,
        }
    }
}

/// `f(x) = ½(x − x*)ᵀA(x − x*) + f*` with diagonal `A`, and
/// `F(x, ξ) = f(x) + ⟨ξ, x − x*⟩`, so `g(x, ξ) = ∇f(x) + ξ`.
///
/// The components of `ξ` are Gaussians of variance `σ²/n` clamped at six
/// standard deviations, hence `E‖ξ‖₂² ≤ σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    diag: Vec<f64>,
    x_star: Vec<f64>,
    f_star: f64,
    sigma_sq: f64,
    mu: f64,
    lipschitz: f64,
    expose_truth: bool,
}

/// Builds a quadratic test problem. `rng` draws `x*` when it is not given.
pub fn make_quadratic(spec: &QuadraticSpec, rng: &mut DirRng) -> Result<QuadraticObjective> {
    let n = spec.n;
    if n == 0 {
        return Err(Error::invalid("n", "dimension must be positive"));
    }
    let diag = spec.spectrum.eigenvalues(n)?;
    let lambda_min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let lipschitz = diag.iter().cloned().fold(0.0, f64::max);
    if !(spec.mu >= 0.0) || spec.mu > lambda_min * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "mu",
            format!("must lie in [0, {lambda_min}] (smallest eigenvalue), got {}", spec.mu),
        ));
    }
    if !(spec.sigma_sq >= 0.0) || !spec.sigma_sq.is_finite() {
        return Err(Error::invalid("sigma_sq", format!("must be >= 0, got {}", spec.sigma_sq)));
    }
    let x_star = match &spec.x_star {
        Some(v) => {
            check_len(n, v.len())?;
            v.clone()
        }
        None if spec.sparse_solution => sparse_point(n, rng),
        None => {
            let scale = 1.0 / (n as f64).sqrt();
            (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
        }
    };
    Ok(QuadraticObjective {
        diag,
        x_star,
        f_star: spec.f_star,
        sigma_sq: spec.sigma_sq,
        mu: spec.mu,
        lipschitz,
        expose_truth: true,
    })
}

/// Point with at most three nonzero entries of magnitude in `[0.5, 1]`.
fn sparse_point(n: usize, rng: &mut DirRng) -> Vec<f64> {
    let mut x = vec![0.0; n];
    let k = n.min(3);
    let mut placed = 0;
    while placed < k {
        let i = rng.random_range(0..n);
        if x[i] != 0.0 {
            continue;
        }
        let mag = 0.5 + 0.5 * rng.random::<f64>();
        x[i] = if rng.random::<bool>() { mag } else { -mag };
        placed += 1;
    }
    x
}

impl QuadraticObjective {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.diag
    }

    /// Hides `f*` and `x*` from [`ObjectiveInfo`], as for a real-world objective.
    pub fn without_ground_truth(mut self) -> Self {
        self.expose_truth = false;
        self
    }

    /// `eᵀAe`.
    pub fn curvature(&self, e: &[f64]) -> f64 {
        self.diag.iter().zip(e).map(|(l, v)| l * v * v).sum()
    }

    fn sigma_component(&self) -> f64 {
        (self.sigma_sq / self.diag.len() as f64).sqrt()
    }
}

impl ObjectiveInfo for QuadraticObjective {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    fn strong_convexity(&self, p: PNorm) -> f64 {
        match p {
            PNorm::Two => self.mu,
            // ‖v‖₁² ≤ n‖v‖₂²
            PNorm::One => self.mu / self.diag.len() as f64,
        }
    }

    fn expected_value(&self, x: &[f64]) -> Option<f64> {
        let q: f64 = self
            .diag
            .iter()
            .zip(x.iter().zip(&self.x_star))
            .map(|(l, (a, b))| l * (a - b) * (a - b))
            .sum();
        Some(0.5 * q + self.f_star)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(
            self.diag
                .iter()
                .zip(x.iter().zip(&self.x_star))
                .map(|(l, (a, b))| l * (a - b))
                .collect(),
        )
    }

    fn f_star(&self) -> Option<f64> {
        self.expose_truth.then_some(self.f_star)
    }

    fn x_star(&self) -> Option<&[f64]> {
        self.expose_truth.then_some(self.x_star.as_slice())
    }
}

impl StochasticObjective for QuadraticObjective {
    fn xi_dim(&self) -> usize {
        if self.sigma_sq > 0.0 {
            self.diag.len()
        } else {
            0
        }
    }

    fn sample_xi_into(&self, rng: &mut DirRng, xi: &mut Vec<f64>) {
        xi.clear();
        if self.sigma_sq == 0.0 {
            return;
        }
        let s = self.sigma_component();
        xi.extend((0..self.diag.len()).map(|_| s * truncated_normal(rng)));
    }

    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        let f = self.expected_value(x).unwrap_or_default();
        if xi.is_empty() {
            return f;
        }
        f + xi
            .iter()
            .zip(x.iter().zip(&self.x_star))
            .map(|(s, (a, b))| s * (a - b))
            .sum::<f64>()
    }

    fn dir_derivative(&self, x: &[f64], xi: &[f64], e: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.diag.len() {
            acc += self.diag[i] * (x[i] - self.x_star[i]) * e[i];
        }
        if !xi.is_empty() {
            acc += dot(xi, e);
        }
        acc
    }

    fn stochastic_gradient(&self, x: &[f64], xi: &[f64]) -> Option<Vec<f64>> {
        let mut g = self.gradient(x)?;
        for (gi, s) in g.iter_mut().zip(xi) {
            *gi += s;
        }
        Some(g)
    }
}

/// Standard normal clamped to `[−6, 6]`.
fn truncated_normal(rng: &mut DirRng) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z.clamp(-6.0, 6.0)
}

/// Uniform direction on the unit Euclidean sphere `S₂(1)`.
pub fn sample_direction(rng: &mut DirRng, n: usize) -> Vec<f64> {
    loop {
        let mut e: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let r = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > 0.0 {
            e.iter_mut().for_each(|v| *v /= r);
            return e;
        }
    }
}

/// Additive oracle noise: `ζ` with `E ζ² ≤ Δ_ζ` and `|η| ≤ Δ_η` almost surely.
///
/// `ζ` is a Gaussian of variance `Δ_ζ` clamped at six standard deviations and
/// `η` is uniform on `[−Δ_η, Δ_η]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    pub delta_zeta: f64,
    pub delta_eta: f64,
}

impl NoiseModel {
    pub fn new(delta_zeta: f64, delta_eta: f64) -> Result<Self> {
        if !(delta_zeta >= 0.0) || !delta_zeta.is_finite() {
            return Err(Error::invalid("delta_zeta", format!("must be >= 0, got {delta_zeta}")));
        }
        if !(delta_eta >= 0.0) || !delta_eta.is_finite() {
            return Err(Error::invalid("delta_eta", format!("must be >= 0, got {delta_eta}")));
        }
        Ok(NoiseModel {
            delta_zeta,
            delta_eta,
        })
    }

    pub fn zero() -> Self {
        NoiseModel::default()
    }

    pub fn sample_zeta(&self, rng: &mut DirRng) -> f64 {
        if self.delta_zeta == 0.0 {
            return 0.0;
        }
        self.delta_zeta.sqrt() * truncated_normal(rng)
    }

    pub fn sample_eta(&self, rng: &mut DirRng) -> f64 {
        if self.delta_eta == 0.0 {
            return 0.0;
        }
        let u: f64 = rng.random_range(-1.0..=1.0);
        (u * self.delta_eta).clamp(-self.delta_eta, self.delta_eta)
    }
}

/// One noisy directional-derivative observation with its noise components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyDerivative {
    pub value: f64,
    /// `⟨g(x, ξ), e⟩`
    pub exact: f64,
    pub zeta: f64,
    pub eta: f64,
}

/// `f̃'(x, ξ, e) = ⟨g(x, ξ), e⟩ + ζ + η`.
pub fn noisy_dir_derivative<O: StochasticObjective + ?Sized>(
    obj: &O,
    noise: &NoiseModel,
    x: &[f64],
    xi: &[f64],
    e: &[f64],
    rng: &mut DirRng,
) -> Result<NoisyDerivative> {
    check_len(obj.dim(), x.len())?;
    check_len(obj.dim(), e.len())?;
    let exact = obj.dir_derivative(x, xi, e);
    let zeta = noise.sample_zeta(rng);
    let eta = noise.sample_eta(rng);
    Ok(NoisyDerivative {
        value: exact + zeta + eta,
        exact,
        zeta,
        eta,
    })
}

/// Rank-one estimate `∇̃ᵐf(x) = ((1/m) Σᵢ f̃'(x, ξᵢ, e))·e`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub vector: Vec<f64>,
    pub direction: Vec<f64>,
    /// The averaged directional derivative multiplying `direction`.
    pub scalar: f64,
    pub batch_size: usize,
    pub oracle_calls: u64,
}

impl GradientEstimate {
    fn along(direction: Vec<f64>, scalar: f64, m: usize) -> Self {
        GradientEstimate {
            vector: direction.iter().map(|v| scalar * v).collect(),
            direction,
            scalar,
            batch_size: m,
            oracle_calls: m as u64,
        }
    }
}

/// Source of mini-batch gradient estimates for the optimizers.
pub trait GradientOracle: Send + Sync {
    fn info(&self) -> &dyn ObjectiveInfo;

    /// `(Δ_ζ, Δ_η)` the oracle's noise satisfies.
    fn noise_levels(&self) -> (f64, f64);

    /// Estimate along a given unit direction with batch size `m`.
    fn estimate_along(
        &self,
        x: &[f64],
        direction: Vec<f64>,
        m: usize,
        rng: &mut DirRng,
    ) -> Result<GradientEstimate>;

    /// Draws `e` uniformly on the sphere, then `m` samples of `ξ`.
    fn estimate(&self, x: &[f64], m: usize, rng: &mut DirRng) -> Result<GradientEstimate> {
        check_len(self.info().dim(), x.len())?;
        let e = sample_direction(rng, self.info().dim());
        self.estimate_along(x, e, m, rng)
    }
}

fn check_batch(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("m", "batch size must be at least 1"));
    }
    Ok(())
}

/// Directional-derivative oracle with additive noise.
pub struct DirectionalOracle<'a, O> {
    pub objective: &'a O,
    pub noise: NoiseModel,
}

impl<'a, O: StochasticObjective> DirectionalOracle<'a, O> {
    pub fn new(objective: &'a O, noise: NoiseModel) -> Self {
        DirectionalOracle { objective, noise }
    }
}

impl<O: StochasticObjective> GradientOracle for DirectionalOracle<'_, O> {
    fn info(&self) -> &dyn ObjectiveInfo {
        self.objective
    }

    fn noise_levels(&self) -> (f64, f64) {
        (self.noise.delta_zeta, self.noise.delta_eta)
    }

    fn estimate_along(
        &self,
        x: &[f64],
        direction: Vec<f64>,
        m: usize,
        rng: &mut DirRng,
    ) -> Result<GradientEstimate> {
        check_batch(m)?;
        check_len(self.objective.dim(), x.len())?;
        check_len(self.objective.dim(), direction.len())?;
        let mut xi = Vec::with_capacity(self.objective.xi_dim());
        let mut total = 0.0;
        for _ in 0..m {
            self.objective.sample_xi_into(rng, &mut xi);
            total += noisy_dir_derivative(self.objective, &self.noise, x, &xi, &direction, rng)?.value;
        }
        Ok(GradientEstimate::along(direction, total / m as f64, m))
    }
}

/// `m`-sample estimate from the directional oracle; records `m` oracle calls.
pub fn estimate_gradient<O: StochasticObjective>(
    obj: &O,
    noise: &NoiseModel,
    x: &[f64],
    m: usize,
    rng: &mut DirRng,
) -> Result<GradientEstimate> {
    DirectionalOracle::new(obj, *noise).estimate(x, m, rng)
}

/// One finite-difference observation with its implied oracle noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSample {
    /// `(f̃(x + te, ξ) − f̃(x, ξ))/t`
    pub quotient: f64,
    /// `⟨g(x, ξ), e⟩`
    pub exact: f64,
    /// `(F(x + te, ξ) − F(x, ξ))/t − ⟨g(x, ξ), e⟩`
    pub zeta: f64,
    /// `(Ξ(x + te, ξ) − Ξ(x, ξ))/t`
    pub eta: f64,
}

/// Two-point value oracle `f̃(x, ξ) = F(x, ξ) + Ξ`, `|Ξ| ≤ Δ`, turned into a
/// directional-derivative oracle by a forward difference with step `t`.
///
/// The value noise is drawn independently at `x` and at `x + te`.
pub struct FiniteDifferenceOracle<'a, O> {
    pub objective: &'a O,
    pub t: f64,
    pub value_noise: f64,
}

impl<'a, O: StochasticObjective> FiniteDifferenceOracle<'a, O> {
    pub fn new(objective: &'a O, t: f64, value_noise: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid("t", format!("smoothing parameter must be > 0, got {t}")));
        }
        if !(value_noise >= 0.0) || !value_noise.is_finite() {
            return Err(Error::invalid("delta", format!("must be >= 0, got {value_noise}")));
        }
        Ok(FiniteDifferenceOracle {
            objective,
            t,
            value_noise,
        })
    }

    fn value_error(&self, rng: &mut DirRng) -> f64 {
        if self.value_noise == 0.0 {
            0.0
        } else {
            rng.random_range(-self.value_noise..=self.value_noise)
        }
    }

    pub fn sample(&self, x: &[f64], xi: &[f64], e: &[f64], rng: &mut DirRng) -> Result<FdSample> {
        check_len(self.objective.dim(), x.len())?;
        check_len(self.objective.dim(), e.len())?;
        let shifted: Vec<f64> = x.iter().zip(e).map(|(a, b)| a + self.t * b).collect();
        let f1 = self.objective.value(&shifted, xi);
        let f0 = self.objective.value(x, xi);
        let noise1 = self.value_error(rng);
        let noise0 = self.value_error(rng);
        let exact = self.objective.dir_derivative(x, xi, e);
        Ok(FdSample {
            quotient: ((f1 + noise1) - (f0 + noise0)) / self.t,
            exact,
            zeta: (f1 - f0) / self.t - exact,
            eta: (noise1 - noise0) / self.t,
        })
    }
}

impl<O: StochasticObjective> GradientOracle for FiniteDifferenceOracle<'_, O> {
    fn info(&self) -> &dyn ObjectiveInfo {
        self.objective
    }

    fn noise_levels(&self) -> (f64, f64) {
        implied_noise_levels(self.t, self.objective.lipschitz(), self.value_noise)
            .expect("t validated at construction")
    }

    fn estimate_along(
        &self,
        x: &[f64],
        direction: Vec<f64>,
        m: usize,
        rng: &mut DirRng,
    ) -> Result<GradientEstimate> {
        check_batch(m)?;
        let mut xi = Vec::with_capacity(self.objective.xi_dim());
        let mut total = 0.0;
        for _ in 0..m {
            self.objective.sample_xi_into(rng, &mut xi);
            total += self.sample(x, &xi, &direction, rng)?.quotient;
        }
        Ok(GradientEstimate::along(direction, total / m as f64, m))
    }
}

/// Forward-difference estimate `(1/m) Σᵢ (f̃(x + te, ξᵢ) − f̃(x, ξᵢ))/t · e`.
pub fn finite_difference_estimate<O: StochasticObjective>(
    obj: &O,
    x: &[f64],
    m: usize,
    t: f64,
    value_noise: f64,
    rng: &mut DirRng,
) -> Result<GradientEstimate> {
    FiniteDifferenceOracle::new(obj, t, value_noise)?.estimate(x, m, rng)
}

/// Oracle noise induced by a forward difference: `(L₂²t²/4, 2Δ/t)`.
pub fn implied_noise_levels(t: f64, lipschitz: f64, value_noise: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid("t", format!("smoothing parameter must be > 0, got {t}")));
    }
    let half = lipschitz * t / 2.0;
    Ok((half * half, 2.0 * value_noise / t))
}

/// `‖e‖₂`, for the unit-direction invariant checks.
pub fn direction_norm(e: &[f64]) -> f64 {
    norm(e, Norm::L2).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn half_norm_sq(n: usize) -> QuadraticObjective {
        let mut spec = QuadraticSpec::new(n, Spectrum::Ones);
        spec.x_star = Some(vec![0.0; n]);
        make_quadratic(&spec, &mut seeded(0)).unwrap()
    }

    #[test]
    fn directions_are_unit() {
        let mut rng = seeded(1);
        for n in [1, 2, 7, 100] {
            for _ in 0..100 {
                let e = sample_direction(&mut rng, n);
                assert!((direction_norm(&e) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sphere_second_moment() {
        let mut rng = seeded(2);
        let n = 100;
        let s: Vec<f64> = (0..n).map(|i| ((i % 7) as f64) - 3.0).collect();
        let ss = dot(&s, &s);
        let samples = 100_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..samples {
            let e = sample_direction(&mut rng, n);
            let v = dot(&s, &e).powi(2);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / samples as f64;
        let se = ((sum_sq / samples as f64 - mean * mean) / (samples as f64 - 1.0)).sqrt();
        assert!((mean - ss / n as f64).abs() <= 3.0 * se, "{mean} vs {}", ss / n as f64);
    }

    #[test]
    fn noiseless_dir_derivative() {
        let f = half_norm_sq(2);
        let noise = NoiseModel::zero();
        let mut rng = seeded(3);
        let d = noisy_dir_derivative(&f, &noise, &[1.0, 0.0], &[], &[0.0, 1.0], &mut rng).unwrap();
        assert_eq!(d.value, 0.0);
        let d = noisy_dir_derivative(&f, &noise, &[1.0, 0.0], &[], &[1.0, 0.0], &mut rng).unwrap();
        assert_eq!(d.value, 1.0);
        assert!(noisy_dir_derivative(&f, &noise, &[1.0], &[], &[1.0, 0.0], &mut rng).is_err());
    }

    #[test]
    fn eta_is_clamped() {
        let f = half_norm_sq(4);
        let noise = NoiseModel::new(0.01, 0.1).unwrap();
        let mut rng = seeded(4);
        let x = [0.3, -0.2, 1.0, 0.5];
        for _ in 0..10_000 {
            let e = sample_direction(&mut rng, 4);
            let d = noisy_dir_derivative(&f, &noise, &x, &[], &e, &mut rng).unwrap();
            assert!((d.value - d.exact - d.zeta).abs() <= 0.1 + 1e-15);
            assert!(d.eta.abs() <= 0.1);
        }
    }

    #[test]
    fn zeta_second_moment_within_level() {
        let noise = NoiseModel::new(0.04, 0.0).unwrap();
        let mut rng = seeded(5);
        let samples = 50_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..samples {
            let z = noise.sample_zeta(&mut rng).powi(2);
            s += z;
            s2 += z * z;
        }
        let mean = s / samples as f64;
        let se = ((s2 / samples as f64 - mean * mean) / samples as f64).sqrt();
        assert!(mean <= 0.04 + 3.0 * se);
    }

    #[test]
    fn batch_of_one_collapses() {
        let f = half_norm_sq(2);
        let mut rng = seeded(6);
        let est = estimate_gradient(&f, &NoiseModel::zero(), &[1.0, 0.0], 1, &mut rng).unwrap();
        let e = &est.direction;
        assert!((est.vector[0] - e[0] * e[0]).abs() < 1e-15);
        assert!((est.vector[1] - e[0] * e[1]).abs() < 1e-15);
        assert_eq!(est.oracle_calls, 1);
        assert!(estimate_gradient(&f, &NoiseModel::zero(), &[1.0, 0.0], 0, &mut rng).is_err());
    }

    #[test]
    fn large_batch_converges_along_fixed_direction() {
        let mut spec = QuadraticSpec::new(6, Spectrum::Linear { min: 0.5, max: 2.0 });
        spec.sigma_sq = 1.0;
        let f = make_quadratic(&spec, &mut seeded(7)).unwrap();
        let x = [0.4, -0.3, 0.2, 1.0, 0.0, -1.0];
        let mut rng = seeded(8);
        let e = sample_direction(&mut rng, 6);
        let m = 100_000;
        let est = DirectionalOracle::new(&f, NoiseModel::zero())
            .estimate_along(&x, e.clone(), m, &mut rng)
            .unwrap();
        let truth = dot(&f.gradient(&x).unwrap(), &e);
        // ⟨ξ, e⟩ has variance at most σ²/n.
        let se = (1.0 / 6.0 / m as f64).sqrt();
        assert!((est.scalar - truth).abs() <= 3.0 * se, "{} vs {truth}", est.scalar);
    }

    #[test]
    fn variance_bound_holds() {
        let mut spec = QuadraticSpec::new(16, Spectrum::Ones);
        spec.sigma_sq = 1.0;
        let f = make_quadratic(&spec, &mut seeded(9)).unwrap();
        let x = vec![0.25; 16];
        let g = f.gradient(&x).unwrap();
        let mut rng = seeded(10);
        let samples = 20_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..samples {
            let xi = f.sample_xi(&mut rng);
            let sg = f.stochastic_gradient(&x, &xi).unwrap();
            let d: f64 = sg.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum();
            s += d;
            s2 += d * d;
        }
        let mean = s / samples as f64;
        let se = ((s2 / samples as f64 - mean * mean) / samples as f64).sqrt();
        assert!(mean <= 1.0 + 3.0 * se, "{mean}");
    }

    #[test]
    fn quadratic_factory() {
        let mut spec = QuadraticSpec::new(5, Spectrum::Ones);
        spec.x_star = Some(vec![0.0; 5]);
        let f = make_quadratic(&spec, &mut seeded(0)).unwrap();
        assert_eq!(f.lipschitz(), 1.0);
        assert_eq!(f.strong_convexity(PNorm::Two), 0.0);
        assert_eq!(f.expected_value(&[1.0, 1.0, 0.0, 0.0, 0.0]), Some(1.0));

        spec.mu = 1.0;
        let f = make_quadratic(&spec, &mut seeded(0)).unwrap();
        assert_eq!(f.strong_convexity(PNorm::Two), 1.0);

        spec.mu = 1.5;
        assert!(make_quadratic(&spec, &mut seeded(0)).is_err());
        let bad = QuadraticSpec::new(3, Spectrum::Explicit { values: vec![1.0, -1.0, 2.0] });
        assert!(make_quadratic(&bad, &mut seeded(0)).is_err());
    }

    #[test]
    fn sparse_solution_has_small_l1_ratio() {
        let mut spec = QuadraticSpec::new(256, Spectrum::Ones);
        spec.sparse_solution = true;
        for seed in 0..20 {
            let f = make_quadratic(&spec, &mut seeded(seed)).unwrap();
            let xs = f.x_star().unwrap();
            let ratio = norm(xs, Norm::L1).unwrap() / norm(xs, Norm::L2).unwrap();
            assert!(ratio <= 3.0);
            assert_eq!(xs.iter().filter(|v| **v != 0.0).count(), 3);
        }
    }

    #[test]
    fn ground_truth_can_be_hidden() {
        let f = half_norm_sq(3).without_ground_truth();
        assert_eq!(f.f_star(), None);
        assert_eq!(f.suboptimality(&[1.0, 0.0, 0.0]), None);
        assert_eq!(f.expected_value(&[1.0, 0.0, 0.0]), Some(0.5));
    }

    #[test]
    fn forward_difference_on_half_norm() {
        let f = half_norm_sq(3);
        let mut rng = seeded(12);
        let x = [0.7, -0.1, 2.0];
        let t = 0.1;
        let est = finite_difference_estimate(&f, &x, 1, t, 0.0, &mut rng).unwrap();
        let e = &est.direction;
        let expect = dot(&x, e) + t / 2.0;
        assert!((est.scalar - expect).abs() < 1e-12);
        assert!(finite_difference_estimate(&f, &x, 1, 0.0, 0.0, &mut rng).is_err());
        assert!(finite_difference_estimate(&f, &x, 1, -1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn forward_difference_approaches_derivative() {
        let spec = QuadraticSpec::new(5, Spectrum::Linear { min: 0.1, max: 1.0 });
        let f = make_quadratic(&spec, &mut seeded(13)).unwrap();
        let x = [0.3, 0.2, -0.4, 1.0, 0.0];
        let fd = finite_difference_estimate(&f, &x, 1, 1e-6, 0.0, &mut seeded(14)).unwrap();
        let dd = estimate_gradient(&f, &NoiseModel::zero(), &x, 1, &mut seeded(14)).unwrap();
        assert_eq!(fd.direction, dd.direction);
        for (a, b) in fd.vector.iter().zip(&dd.vector) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn value_noise_bound() {
        let f = half_norm_sq(4);
        let oracle = FiniteDifferenceOracle::new(&f, 0.1, 1e-4).unwrap();
        let mut rng = seeded(15);
        for _ in 0..10_000 {
            let e = sample_direction(&mut rng, 4);
            let s = oracle.sample(&[1.0, 2.0, 3.0, 4.0], &[], &e, &mut rng).unwrap();
            assert!(s.eta.abs() <= 2e-3 + 1e-15);
        }
    }

    #[test]
    fn implied_levels() {
        let (z, e) = implied_noise_levels(0.1, 1.0, 1e-4).unwrap();
        assert!((z - 0.0025).abs() <= 4.0 * f64::EPSILON * 0.0025);
        assert_eq!(e, 0.002);
        assert_eq!(implied_noise_levels(0.3, 2.0, 0.0).unwrap().1, 0.0);
        assert_eq!(implied_noise_levels(2.0 / 3.0, 3.0, 0.0).unwrap().0, 1.0);
        assert!(implied_noise_levels(0.0, 1.0, 0.0).is_err());
    }
}
