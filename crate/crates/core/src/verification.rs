//! Independent checks of the closed-form geometry, the sphere constants and
//! the oracle noise model.
//!
//! Monte-Carlo work is split into fixed-size chunks, each driven by its own
//! generator substream, so results do not depend on thread scheduling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::geometry::{dot, norm, rho_constant, DualIndex, PNorm, Prox, ProxSetup, ShiftedProx};
use crate::oracle::{
    estimate_gradient, sample_direction, FiniteDifferenceOracle, NoiseModel, ObjectiveInfo, QuadraticObjective,
    StochasticObjective,
};
use crate::rng::{substream, DirRng};

/// Smallest sample count accepted for an asserted report.
pub const MIN_SAMPLES: u64 = 10_000;
const CHUNK: u64 = 4096;
/// Relative slack absorbing rounding in quantities that meet their bound
/// with equality (e.g. `‖e‖₂² = 1`).
const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `mean + 3·SE ≤ bound`
    UpperBound,
    /// `|mean − bound| ≤ 3·SE`
    Equality,
    /// `mean ≤ bound`, with the bound already a multiple of the SE.
    AtMost,
    /// No sample violated its per-sample bound.
    NoViolations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub quantity: String,
    pub n: usize,
    pub samples: u64,
    pub mean: f64,
    pub std_error: f64,
    /// Bound, or target for equalities.
    pub bound: f64,
    pub kind: CheckKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    pub pass: bool,
}

impl MonteCarloReport {
    fn decide(mut self) -> Self {
        let slack = ROUNDING_SLACK * self.bound.abs();
        self.pass = match self.kind {
            CheckKind::UpperBound => self.mean + 3.0 * self.std_error <= self.bound + slack,
            CheckKind::Equality => (self.mean - self.bound).abs() <= 3.0 * self.std_error + slack,
            CheckKind::AtMost => self.mean <= self.bound + slack,
            CheckKind::NoViolations => self.violations == Some(0),
        };
        self
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Running mean and variance (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, o: &Moments) {
        if o.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *o;
            return;
        }
        let total = self.count + o.count;
        let d = o.mean - self.mean;
        self.mean += d * o.count as f64 / total as f64;
        self.m2 += o.m2 + d * d * (self.count as f64 * o.count as f64) / total as f64;
        self.count = total;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

fn check_samples(samples: u64) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(Error::invalid(
            "samples",
            format!("need at least {MIN_SAMPLES} samples, got {samples}"),
        ));
    }
    Ok(())
}

/// Runs `body(rng, count)` over chunks of the sample budget and returns the
/// per-chunk results in chunk order.
fn chunked<T, F>(base_seed: u64, samples: u64, body: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut DirRng, u64) -> T + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(samples - c * CHUNK);
            body(&mut substream(base_seed, c), count)
        })
        .collect()
}

fn merge_all(parts: impl IntoIterator<Item = Moments>) -> Moments {
    let mut m = Moments::default();
    for p in parts {
        m.merge(&p);
    }
    m
}

/// Sphere constants: `E‖e‖_q² ≤ ρₙ` and `E⟨s, e⟩²‖e‖_q² ≤ (6ρₙ/n)‖s‖₂²` for a
/// fixed random `s`. Dimensions below 8 run with a warning.
pub fn check_lemma1(n: usize, q: DualIndex, samples: u64, rng: &mut DirRng) -> Result<[MonteCarloReport; 2]> {
    check_samples(samples)?;
    if n < 2 {
        return Err(Error::invalid("n", format!("dimension must be at least 2, got {n}")));
    }
    let rho = rho_constant(n, q);
    let s: Vec<f64> = (0..n).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
    let s_sq = dot(&s, &s);
    let base = rng.random::<u64>();
    let parts = chunked(base, samples, |r, count| {
        let (mut a, mut b) = (Moments::default(), Moments::default());
        for _ in 0..count {
            let e = sample_direction(r, n);
            let eq = norm(&e, q.norm()).expect("n >= 2");
            let eq2 = eq * eq;
            let se = dot(&s, &e);
            a.push(eq2);
            b.push(se * se * eq2);
        }
        (a, b)
    });
    let a = merge_all(parts.iter().map(|p| p.0));
    let b = merge_all(parts.iter().map(|p| p.1));
    let qname = match q {
        DualIndex::Two => "2",
        DualIndex::Inf => "inf",
    };
    Ok([
        MonteCarloReport {
            quantity: format!("E|e|_{qname}^2"),
            n,
            samples,
            mean: a.mean,
            std_error: a.std_error(),
            bound: rho,
            kind: CheckKind::UpperBound,
            violations: None,
            max: None,
            pass: false,
        }
        .decide(),
        MonteCarloReport {
            quantity: format!("E<s,e>^2 |e|_{qname}^2"),
            n,
            samples,
            mean: b.mean,
            std_error: b.std_error(),
            bound: 6.0 * rho / n as f64 * s_sq,
            kind: CheckKind::UpperBound,
            violations: None,
            max: None,
            pass: false,
        }
        .decide(),
    ])
}

/// Unbiasedness of the single-sample estimator up to the factor `n`, and
/// `E⟨s, e⟩² = ‖s‖₂²/n` with `s = ∇f(x)`, on a noiseless objective.
pub fn check_estimator_identity<O: StochasticObjective>(
    obj: &O,
    x: &[f64],
    samples: u64,
    rng: &mut DirRng,
) -> Result<[MonteCarloReport; 2]> {
    check_samples(samples)?;
    check_len(obj.dim(), x.len())?;
    if obj.sigma_sq() != 0.0 {
        return Err(Error::invalid("sigma_sq", "the estimator identity needs a noiseless objective"));
    }
    let grad = obj
        .gradient(x)
        .ok_or_else(|| Error::invalid("objective", "the estimator identity needs the exact gradient"))?;
    let n = x.len();
    let nf = n as f64;
    let s_sq = dot(&grad, &grad);
    let base = rng.random::<u64>();
    let parts = chunked(base, samples, |r, count| {
        let mut comps = vec![Moments::default(); n];
        let mut proj = Moments::default();
        for _ in 0..count {
            let est = estimate_gradient(obj, &NoiseModel::zero(), x, 1, r).expect("dimensions checked");
            for (m, v) in comps.iter_mut().zip(&est.vector) {
                m.push(nf * v);
            }
            let se = dot(&grad, &est.direction);
            proj.push(se * se);
        }
        (comps, proj)
    });
    let mut comps = vec![Moments::default(); n];
    let mut proj = Moments::default();
    for (c, p) in &parts {
        for (acc, m) in comps.iter_mut().zip(c) {
            acc.merge(m);
        }
        proj.merge(p);
    }
    let bias: f64 = comps
        .iter()
        .zip(&grad)
        .map(|(m, g)| (m.mean - g) * (m.mean - g))
        .sum::<f64>()
        .sqrt();
    let se = comps.iter().map(|m| m.variance()).sum::<f64>().sqrt() / (samples as f64).sqrt();
    Ok([
        MonteCarloReport {
            quantity: "|n*mean(estimate) - grad f|_2".into(),
            n,
            samples,
            mean: bias,
            std_error: se,
            bound: 4.0 * se,
            kind: CheckKind::AtMost,
            violations: None,
            max: None,
            pass: false,
        }
        .decide(),
        MonteCarloReport {
            quantity: "E<s,e>^2".into(),
            n,
            samples,
            mean: proj.mean,
            std_error: proj.std_error(),
            bound: s_sq / nf,
            kind: CheckKind::Equality,
            violations: None,
            max: None,
            pass: false,
        }
        .decide(),
    ])
}

#[derive(Debug, Clone, Copy, Default)]
struct FdStats {
    identity: Moments,
    identity_max: f64,
    identity_violations: u64,
    zeta_max: f64,
    zeta_violations: u64,
    eta: Moments,
    eta_max: f64,
    eta_violations: u64,
}

/// Finite-difference noise on a quadratic at random points: the smoothing
/// error equals `(t/2)eᵀAe` up to rounding, `|ζ| ≤ L₂t/2` and `|η| ≤ 2Δ/t`.
pub fn check_fd_noise_bounds(
    obj: &QuadraticObjective,
    t: f64,
    value_noise: f64,
    samples: u64,
    rng: &mut DirRng,
) -> Result<[MonteCarloReport; 3]> {
    check_samples(samples)?;
    let fd = FiniteDifferenceOracle::new(obj, t, value_noise)?;
    let n = obj.dim();
    let lipschitz = obj.lipschitz();
    let zeta_bound = lipschitz * t / 2.0;
    let eta_bound = 2.0 * value_noise / t;
    let x_star = obj
        .x_star()
        .ok_or_else(|| Error::invalid("objective", "the finite-difference check needs x*"))?;
    let base = rng.random::<u64>();
    let parts = chunked(base, samples, |r, count| {
        let mut st = FdStats::default();
        let mut xi = Vec::new();
        let scale = 1.0 / (n as f64).sqrt();
        for _ in 0..count {
            let x: Vec<f64> = (0..n)
                .map(|_| scale * r.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let e = sample_direction(r, n);
            obj.sample_xi_into(r, &mut xi);
            let smp = fd.sample(&x, &xi, &e, r).expect("dimensions match");
            let analytic = t / 2.0 * obj.curvature(&e);
            let shifted: Vec<f64> = x.iter().zip(&e).map(|(a, b)| a + t * b).collect();
            let tol = fd_rounding(obj, x_star, &x, &shifted, &xi, smp.exact, analytic, t);
            let dev = (smp.zeta - analytic).abs();
            st.identity.push(dev);
            st.identity_max = st.identity_max.max(dev);
            st.identity_violations += u64::from(dev > tol);
            st.zeta_max = st.zeta_max.max(smp.zeta.abs());
            st.zeta_violations += u64::from(smp.zeta.abs() > zeta_bound + tol);
            st.eta.push(smp.eta);
            st.eta_max = st.eta_max.max(smp.eta.abs());
            st.eta_violations += u64::from(smp.eta.abs() > eta_bound);
        }
        st
    });
    let mut total = FdStats::default();
    for p in &parts {
        total.identity.merge(&p.identity);
        total.identity_max = total.identity_max.max(p.identity_max);
        total.identity_violations += p.identity_violations;
        total.zeta_max = total.zeta_max.max(p.zeta_max);
        total.zeta_violations += p.zeta_violations;
        total.eta.merge(&p.eta);
        total.eta_max = total.eta_max.max(p.eta_max);
        total.eta_violations += p.eta_violations;
    }
    let report = |quantity: &str, m: &Moments, bound: f64, max: f64, violations: u64| {
        MonteCarloReport {
            quantity: quantity.into(),
            n,
            samples,
            mean: m.mean,
            std_error: m.std_error(),
            bound,
            kind: CheckKind::NoViolations,
            violations: Some(violations),
            max: Some(max),
            pass: false,
        }
        .decide()
    };
    Ok([
        report(
            "|zeta - (t/2) e'Ae|",
            &total.identity,
            0.0,
            total.identity_max,
            total.identity_violations,
        ),
        report("|zeta| <= L t/2", &total.identity, zeta_bound, total.zeta_max, total.zeta_violations),
        report("|eta| <= 2 Delta/t", &total.eta, eta_bound, total.eta_max, total.eta_violations),
    ])
}

/// Rounding allowance for `(F(x + te) − F(x))/t − ⟨g, e⟩` on a quadratic:
/// per-term magnitudes of both evaluations, the rounding of `x + te`, and
/// the inner products.
#[allow(clippy::too_many_arguments)]
fn fd_rounding(
    obj: &QuadraticObjective,
    x_star: &[f64],
    x: &[f64],
    shifted: &[f64],
    xi: &[f64],
    exact: f64,
    analytic: f64,
    t: f64,
) -> f64 {
    let lam = obj.eigenvalues();
    let mut mag = 0.0;
    for i in 0..x.len() {
        let (d0, d1) = (x[i] - x_star[i], shifted[i] - x_star[i]);
        let s = xi.get(i).copied().unwrap_or(0.0).abs();
        mag += lam[i] * (d0 * d0 + d1 * d1) / 2.0 + s * (d0.abs() + d1.abs());
        mag += (lam[i] * d1.abs() + s) * (shifted[i].abs() + x_star[i].abs());
    }
    let n = x.len() as f64;
    4.0 * (n + 4.0) * f64::EPSILON * (mag / t + exact.abs() + analytic)
}

/// Reference prox function, written without the scaled-power code used by
/// the geometry module.
struct Reference {
    p: PNorm,
    kappa: f64,
    coeff: f64,
    center: Option<Vec<f64>>,
    radius: f64,
}

impl Reference {
    fn new(p: PNorm, n: usize, center: Option<Vec<f64>>, radius: f64) -> Self {
        let ln_n = (n as f64).ln();
        let kappa = 1.0 + 1.0 / ln_n;
        let coeff = std::f64::consts::E * (n as f64).powf((kappa - 1.0) * (2.0 - kappa) / kappa) * ln_n;
        Reference {
            p,
            kappa,
            coeff,
            center,
            radius,
        }
    }

    fn local(&self, v: &[f64]) -> Vec<f64> {
        match &self.center {
            Some(u) => v.iter().zip(u).map(|(a, b)| (a - b) / self.radius).collect(),
            None => v.to_vec(),
        }
    }

    fn base_value(&self, x: &[f64]) -> f64 {
        match self.p {
            PNorm::Two => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            PNorm::One => {
                let s: f64 = x.iter().map(|v| v.abs().powf(self.kappa)).sum();
                0.5 * self.coeff * s.powf(2.0 / self.kappa)
            }
        }
    }

    fn base_gradient(&self, x: &[f64]) -> Vec<f64> {
        match self.p {
            PNorm::Two => x.to_vec(),
            PNorm::One => {
                let s: f64 = x.iter().map(|v| v.abs().powf(self.kappa)).sum();
                if s == 0.0 {
                    return vec![0.0; x.len()];
                }
                let f = self.coeff * s.powf((2.0 - self.kappa) / self.kappa);
                x.iter().map(|v| f * v.abs().powf(self.kappa - 1.0) * v.signum()).collect()
            }
        }
    }

    fn value(&self, v: &[f64]) -> f64 {
        let r2 = if self.center.is_some() { self.radius * self.radius } else { 1.0 };
        r2 * self.base_value(&self.local(v))
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let r = if self.center.is_some() { self.radius } else { 1.0 };
        self.base_gradient(&self.local(v)).into_iter().map(|g| r * g).collect()
    }
}

const BRUTE_MAX_ITERS: usize = 200_000;

/// Minimizes `step·⟨g, v − z⟩ + V[z](v)` by gradient descent with
/// Barzilai–Borwein trial steps and Armijo backtracking, until
/// `‖∇‖₂ ≤ tol`. `shift` selects the prox `R²d((x − u)/R)`.
pub fn brute_force_mirror_step(
    setup: &ProxSetup,
    shift: Option<(&[f64], f64)>,
    z: &[f64],
    g: &[f64],
    step: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let n = setup.n();
    check_len(n, z.len())?;
    check_len(n, g.len())?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    if !(step >= 0.0) || !step.is_finite() {
        return Err(Error::invalid("step", format!("must be non-negative, got {step}")));
    }
    let reference = match shift {
        Some((u, r)) => {
            check_len(n, u.len())?;
            if !(r > 0.0) {
                return Err(Error::invalid("radius", format!("must be positive, got {r}")));
            }
            Reference::new(setup.p(), n, Some(u.to_vec()), r)
        }
        None => Reference::new(setup.p(), n, None, 1.0),
    };
    let grad_z = reference.gradient(z);
    let lin: Vec<f64> = g.iter().zip(&grad_z).map(|(gi, dz)| step * gi - dz).collect();
    // φ(v) = ⟨lin, v⟩ + d(v), up to a constant.
    let phi = |v: &[f64]| dot(&lin, v) + reference.value(v);
    let phi_scale = |v: &[f64]| lin.iter().zip(v).map(|(a, b)| (a * b).abs()).sum::<f64>() + reference.value(v);
    let grad_phi = |v: &[f64]| -> Vec<f64> {
        reference.gradient(v).iter().zip(&lin).map(|(a, b)| a + b).collect()
    };

    let mut v = z.to_vec();
    let mut gv = grad_phi(&v);
    let mut fv = phi(&v);
    let mut h = 1.0 / reference.coeff.max(1.0);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut gnorm = dot(&gv, &gv).sqrt();
    for _ in 0..BRUTE_MAX_ITERS {
        if gnorm <= tol {
            return Ok(v);
        }
        if let Some((pv, pg)) = &prev {
            let s: Vec<f64> = v.iter().zip(pv).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gv.iter().zip(pg).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 0.0 {
                h = dot(&s, &s) / sy;
            }
        }
        let slack = 16.0 * f64::EPSILON * phi_scale(&v);
        let mut accepted = None;
        for _ in 0..80 {
            let cand: Vec<f64> = v.iter().zip(&gv).map(|(a, b)| a - h * b).collect();
            let fc = phi(&cand);
            if fc <= fv - 1e-4 * h * gnorm * gnorm + slack {
                accepted = Some((cand, fc));
                break;
            }
            h *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            break;
        };
        let gc = grad_phi(&cand);
        prev = Some((std::mem::replace(&mut v, cand), std::mem::replace(&mut gv, gc)));
        fv = fc;
        gnorm = dot(&gv, &gv).sqrt();
    }
    if gnorm <= tol {
        return Ok(v);
    }
    Err(Error::NonConvergence {
        what: "brute-force mirror step",
        iterations: BRUTE_MAX_ITERS,
        residual: gnorm,
    })
}

/// Closed-form mirror steps of the `p` setup against the brute-force
/// minimizer on random `(z, g, step)`; odd instances use a random shifted
/// prox. The report's `max` is the worst max-norm disagreement.
pub fn check_mirror_step(p: PNorm, n: usize, instances: u64, tol: f64, rng: &mut DirRng) -> Result<MonteCarloReport> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    let setup = ProxSetup::new(p, n)?;
    // The minimized objective is 1-strongly convex, so a gradient norm of
    // `inner` puts the brute-force answer within `inner` of the minimizer.
    let inner = (tol * 1e-2).max(1e-10);
    let base = rng.random::<u64>();
    let gauss = |r: &mut DirRng| -> Vec<f64> { (0..n).map(|_| r.sample(rand_distr::StandardNormal)).collect() };
    let diffs: Vec<f64> = (0..instances)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let r = &mut substream(base, i);
            let z = gauss(r);
            let g = gauss(r);
            let step = r.random_range(0.01..1.0);
            let (closed, brute) = if i % 2 == 0 {
                (
                    setup.mirror_step(&z, &g, step)?,
                    brute_force_mirror_step(&setup, None, &z, &g, step, inner)?,
                )
            } else {
                let u = gauss(r);
                let radius = r.random_range(0.1..3.0);
                let shifted = ShiftedProx::new(setup.clone(), u.clone(), radius)?;
                (
                    shifted.mirror_step(&z, &g, step)?,
                    brute_force_mirror_step(&setup, Some((&u, radius)), &z, &g, step, inner)?,
                )
            };
            Ok(closed.iter().zip(&brute).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    let mut m = Moments::default();
    diffs.iter().for_each(|&d| m.push(d));
    Ok(MonteCarloReport {
        quantity: format!("mirror_step_p{}_max_abs_diff", p.index()),
        n,
        samples: instances,
        mean: m.mean,
        std_error: m.std_error(),
        bound: tol,
        kind: CheckKind::NoViolations,
        violations: Some(diffs.iter().filter(|&&d| !(d <= tol)).count() as u64),
        max: Some(diffs.iter().cloned().fold(0.0, f64::max)),
        pass: false,
    }
    .decide())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{make_quadratic, QuadraticSpec, Spectrum};
    use crate::rng::seeded;
    use rand_distr::StandardNormal;

    fn gauss(rng: &mut DirRng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..333].iter().for_each(|&x| a.push(x));
        xs[333..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.count, all.count);
        assert!((a.mean - all.mean).abs() < 1e-12);
        assert!((a.variance() - all.variance()).abs() < 1e-9);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        assert!(check_lemma1(8, DualIndex::Two, 9_999, &mut seeded(0)).is_err());
    }

    #[test]
    fn lemma1_euclidean_is_tight() {
        let [a, b] = check_lemma1(100, DualIndex::Two, 100_000, &mut seeded(1)).unwrap();
        assert!((a.mean - 1.0).abs() < 1e-12);
        assert!(a.pass && b.pass, "{a:?} {b:?}");
    }

    #[test]
    fn lemma1_infinity_bounds() {
        let [a, b] = check_lemma1(100, DualIndex::Inf, 100_000, &mut seeded(2)).unwrap();
        assert!((a.bound - 0.6568).abs() < 1e-4);
        assert!(a.pass && b.pass, "{a:?} {b:?}");
        let [a, _] = check_lemma1(8, DualIndex::Inf, 10_000, &mut seeded(3)).unwrap();
        assert!((a.bound - 3.159).abs() < 1e-3);
        assert!(a.pass);
    }

    #[test]
    fn lemma1_is_reproducible() {
        let a = check_lemma1(16, DualIndex::Inf, 20_000, &mut seeded(4)).unwrap();
        let b = check_lemma1(16, DualIndex::Inf, 20_000, &mut seeded(4)).unwrap();
        assert_eq!(a, b);
    }

    fn half_norm(n: usize) -> QuadraticObjective {
        let mut spec = QuadraticSpec::new(n, Spectrum::Ones);
        spec.x_star = Some(vec![0.0; n]);
        make_quadratic(&spec, &mut seeded(0)).unwrap()
    }

    #[test]
    fn estimator_identity_on_basis_vector() {
        let f = half_norm(8);
        let mut x = vec![0.0; 8];
        x[0] = 1.0;
        let [bias, proj] = check_estimator_identity(&f, &x, 100_000, &mut seeded(5)).unwrap();
        assert_eq!(proj.bound, 0.125);
        assert!(bias.pass && proj.pass, "{bias:?} {proj:?}");
    }

    #[test]
    fn estimator_vanishes_at_minimum() {
        let f = half_norm(8);
        let [bias, proj] = check_estimator_identity(&f, &[0.0; 8], 10_000, &mut seeded(6)).unwrap();
        assert_eq!((bias.mean, bias.std_error, proj.mean), (0.0, 0.0, 0.0));
        assert!(bias.pass && proj.pass);
    }

    #[test]
    fn estimator_identity_rejects_noisy_objective() {
        let mut spec = QuadraticSpec::new(4, Spectrum::Ones);
        spec.sigma_sq = 1.0;
        let f = make_quadratic(&spec, &mut seeded(0)).unwrap();
        assert!(check_estimator_identity(&f, &[0.0; 4], 10_000, &mut seeded(0)).is_err());
    }

    #[test]
    fn fd_bounds_hold() {
        let mut spec = QuadraticSpec::new(10, Spectrum::Linear { min: 0.1, max: 2.0 });
        spec.sigma_sq = 0.5;
        let f = make_quadratic(&spec, &mut seeded(7)).unwrap();
        let reports = check_fd_noise_bounds(&f, 0.1, 1e-3, 10_000, &mut seeded(8)).unwrap();
        for r in &reports {
            assert!(r.pass, "{r:?}");
        }
        assert!(reports[2].max.unwrap() <= 0.02);
        let reports = check_fd_noise_bounds(&f, 0.1, 0.0, 10_000, &mut seeded(8)).unwrap();
        assert_eq!(reports[2].max, Some(0.0));
    }

    #[test]
    fn fd_identity_is_half_t_for_identity_matrix() {
        let f = half_norm(5);
        let [identity, ..] = check_fd_noise_bounds(&f, 0.3, 0.0, 10_000, &mut seeded(9)).unwrap();
        assert!(identity.pass);
        assert!(identity.max.unwrap() < 1e-14);
    }

    #[test]
    fn brute_force_euclidean() {
        let s = ProxSetup::new(PNorm::Two, 6).unwrap();
        let mut rng = seeded(10);
        let (z, g) = (gauss(&mut rng, 6), gauss(&mut rng, 6));
        let v = brute_force_mirror_step(&s, None, &z, &g, 0.7, 1e-12).unwrap();
        let expect: Vec<f64> = z.iter().zip(&g).map(|(a, b)| a - 0.7 * b).collect();
        assert!(max_abs_diff(&v, &expect) < 1e-11);
        assert_eq!(brute_force_mirror_step(&s, None, &z, &g, 0.0, 1e-12).unwrap(), z);
    }

    #[test]
    fn brute_force_matches_closed_form_l1() {
        let mut rng = seeded(11);
        for n in [8usize, 32] {
            let s = ProxSetup::new(PNorm::One, n).unwrap();
            for i in 0..100 {
                let z = gauss(&mut rng, n);
                let g = gauss(&mut rng, n);
                let step = rng.random_range(0.01..1.0);
                if i % 2 == 0 {
                    let closed = s.mirror_step(&z, &g, step).unwrap();
                    let brute = brute_force_mirror_step(&s, None, &z, &g, step, 1e-10).unwrap();
                    assert!(max_abs_diff(&closed, &brute) < 1e-6, "n={n} i={i}");
                } else {
                    let u = gauss(&mut rng, n);
                    let r = rng.random_range(0.1..3.0);
                    let sh = ShiftedProx::new(s.clone(), u.clone(), r).unwrap();
                    let closed = sh.mirror_step(&z, &g, step).unwrap();
                    let brute = brute_force_mirror_step(&s, Some((&u, r)), &z, &g, step, 1e-10).unwrap();
                    assert!(max_abs_diff(&closed, &brute) < 1e-6, "shifted n={n} i={i}");
                }
            }
        }
    }

    #[test]
    fn mirror_check_report() {
        let r = check_mirror_step(PNorm::One, 8, 20, 1e-6, &mut seeded(13)).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!((r.samples, r.violations), (20, Some(0)));
        let r = check_mirror_step(PNorm::Two, 5, 10, 1e-9, &mut seeded(13)).unwrap();
        assert!(r.pass && r.max.unwrap() < 1e-9, "{r:?}");
    }

    #[test]
    fn brute_force_rejects_bad_tolerance() {
        let s = ProxSetup::new(PNorm::One, 8).unwrap();
        assert!(brute_force_mirror_step(&s, None, &[0.0; 8], &[1.0; 8], 1.0, 0.0).is_err());
    }

    #[test]
    fn report_json_line() {
        let [a, _] = check_lemma1(8, DualIndex::Two, 10_000, &mut seeded(12)).unwrap();
        let line = a.to_json_line();
        assert!(!line.contains('\n'));
        let back: MonteCarloReport = serde_json::from_str(&line).unwrap();
        assert_eq!(back, a);
    }
}
