//! Norms, prox-functions, Bregman divergences and mirror-descent steps.
//!
//! Two setups are supported:
//!
//! * `p = 2`: `d(x) = ½‖x‖₂²`, whose mirror step is a plain gradient step;
//! * `p = 1`: `d(x) = (c/2)‖x‖_κ²` with `κ = 1 + 1/ln n` and
//!   `c = e·n^{(κ−1)(2−κ)/κ}·ln n`, which is 1-strongly convex w.r.t. `‖·‖₁`.
//!
//! The `p = 1` mirror step is evaluated in closed form through the conjugate
//! `d*(y) = ‖y‖_{κ'}² / (2c)`, `κ' = κ/(κ−1)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Norm index used for primal and dual norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
    Inf,
}

/// Geometry of a prox setup: the primal norm `‖·‖_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PNorm {
    One,
    Two,
}

impl PNorm {
    pub fn from_index(p: u32) -> Result<Self> {
        match p {
            1 => Ok(PNorm::One),
            2 => Ok(PNorm::Two),
            other => Err(Error::invalid("p", format!("expected 1 or 2, got {other}"))),
        }
    }

    pub fn index(self) -> u32 {
        match self {
            PNorm::One => 1,
            PNorm::Two => 2,
        }
    }

    pub fn primal(self) -> Norm {
        match self {
            PNorm::One => Norm::L1,
            PNorm::Two => Norm::L2,
        }
    }

    /// The dual index `q` with `1/p + 1/q = 1`.
    pub fn dual(self) -> DualIndex {
        match self {
            PNorm::One => DualIndex::Inf,
            PNorm::Two => DualIndex::Two,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DualIndex {
    Two,
    Inf,
}

impl DualIndex {
    pub fn norm(self) -> Norm {
        match self {
            DualIndex::Two => Norm::L2,
            DualIndex::Inf => Norm::Inf,
        }
    }

    /// `1/q`, with `1/∞ = 0`.
    pub fn reciprocal(self) -> f64 {
        match self {
            DualIndex::Two => 0.5,
            DualIndex::Inf => 0.0,
        }
    }
}

/// `‖x‖_p`.
pub fn norm(x: &[f64], p: Norm) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Empty);
    }
    Ok(match p {
        Norm::L1 => x.iter().map(|v| v.abs()).sum(),
        Norm::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Norm::Inf => x.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `r^e` for `r ≥ 0`, with `0^e = 0` and evaluated as `exp(e·ln r)` so that
/// exponents close to zero never hit the `0⁰` ambiguity.
#[inline]
fn pow_guarded(r: f64, e: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        (e * r.ln()).exp()
    }
}

/// Scaled form of an `r`-norm: returns `(M, S)` with `M = max|x_i|` and
/// `S = Σ (|x_i|/M)^r`, so that `‖x‖_r = M·S^{1/r}` without overflow.
fn scaled_power_sum(x: &[f64], r: f64) -> (f64, f64) {
    let m = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return (0.0, 0.0);
    }
    let s = x.iter().map(|v| pow_guarded(v.abs() / m, r)).sum();
    (m, s)
}

/// Gradient of `(scale/2)‖x‖_r²`: component `i` is
/// `scale·‖x‖_r^{2−r}·|x_i|^{r−1}·sign(x_i)`, and `0` at the origin.
fn squared_norm_gradient(x: &[f64], r: f64, scale: f64) -> Vec<f64> {
    let (m, s) = scaled_power_sum(x, r);
    if m == 0.0 {
        return vec![0.0; x.len()];
    }
    let common = scale * m * pow_guarded(s, (2.0 - r) / r);
    x.iter()
        .map(|&v| common * pow_guarded(v.abs() / m, r - 1.0) * v.signum())
        .collect()
}

/// Prox setup for `p ∈ {1, 2}` in dimension `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxSetup {
    p: PNorm,
    n: usize,
    kappa: f64,
    coeff: f64,
}

impl ProxSetup {
    /// Builds the setup. `p = 1` needs `n ≥ 3`: below that `1 + 1/ln n > 2`
    /// and the prox-function loses 1-strong convexity w.r.t. `‖·‖₁`.
    pub fn new(p: PNorm, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n", format!("dimension must be at least 2, got {n}")));
        }
        match p {
            PNorm::Two => Ok(ProxSetup {
                p,
                n,
                kappa: 2.0,
                coeff: 1.0,
            }),
            PNorm::One => {
                if n < 3 {
                    return Err(Error::invalid(
                        "n",
                        format!("the p=1 prox setup needs n >= 3, got {n}"),
                    ));
                }
                let ln_n = (n as f64).ln();
                let kappa = 1.0 + 1.0 / ln_n;
                let exponent = (kappa - 1.0) * (2.0 - kappa) / kappa;
                let coeff = std::f64::consts::E * (n as f64).powf(exponent) * ln_n;
                Ok(ProxSetup { p, n, kappa, coeff })
            }
        }
    }

    pub fn p(&self) -> PNorm {
        self.p
    }

    pub fn q(&self) -> DualIndex {
        self.p.dual()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Smoothing exponent `κ` (2 for the Euclidean setup).
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Conjugate exponent `κ' = κ/(κ−1)`.
    pub fn kappa_dual(&self) -> f64 {
        self.kappa / (self.kappa - 1.0)
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    /// `ρₙ` for this setup's dual index.
    pub fn rho(&self) -> f64 {
        rho_constant(self.n, self.q())
    }

    /// `Ω_p`, the bound on `2·E d((x − x*)/R)`.
    pub fn omega(&self) -> f64 {
        omega_constant(self)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        check_len(self.n, x.len())
    }

    /// Inverse mirror map `∇d*`.
    pub fn conjugate_gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        Ok(match self.p {
            PNorm::Two => y.to_vec(),
            PNorm::One => squared_norm_gradient(y, self.kappa_dual(), 1.0 / self.coeff),
        })
    }
}

/// Prox-function interface shared by [`ProxSetup`] and [`ShiftedProx`].
pub trait Prox: Send + Sync {
    fn setup(&self) -> &ProxSetup;

    fn dim(&self) -> usize {
        self.setup().n()
    }

    /// `d(x)`.
    fn value(&self, x: &[f64]) -> Result<f64>;

    /// `∇d(x)`.
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Bregman divergence `V[z](x) = d(x) − d(z) − ⟨∇d(z), x − z⟩`.
    fn bregman(&self, z: &[f64], x: &[f64]) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        let gz = self.gradient(z)?;
        let lin: f64 = gz.iter().zip(x.iter().zip(z)).map(|(g, (a, b))| g * (a - b)).sum();
        Ok((self.value(x)? - self.value(z)? - lin).max(0.0))
    }

    /// `argmin_v { step·⟨g, v − z⟩ + V[z](v) }`.
    fn mirror_step(&self, z: &[f64], g: &[f64], step: f64) -> Result<Vec<f64>>;
}

fn check_step(step: f64) -> Result<()> {
    if !(step >= 0.0) || !step.is_finite() {
        return Err(Error::invalid("step", format!("must be finite and >= 0, got {step}")));
    }
    Ok(())
}

impl Prox for ProxSetup {
    fn setup(&self) -> &ProxSetup {
        self
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(match self.p {
            PNorm::Two => 0.5 * dot(x, x),
            PNorm::One => {
                let (m, s) = scaled_power_sum(x, self.kappa);
                0.5 * self.coeff * m * m * pow_guarded(s, 2.0 / self.kappa)
            }
        })
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(match self.p {
            PNorm::Two => x.to_vec(),
            PNorm::One => squared_norm_gradient(x, self.kappa, self.coeff),
        })
    }

    fn bregman(&self, z: &[f64], x: &[f64]) -> Result<f64> {
        self.check(z)?;
        self.check(x)?;
        match self.p {
            PNorm::Two => Ok(0.5 * z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()),
            PNorm::One => {
                let gz = self.gradient(z)?;
                let lin: f64 = gz.iter().zip(x.iter().zip(z)).map(|(g, (a, b))| g * (a - b)).sum();
                Ok((self.value(x)? - self.value(z)? - lin).max(0.0))
            }
        }
    }

    fn mirror_step(&self, z: &[f64], g: &[f64], step: f64) -> Result<Vec<f64>> {
        self.check(z)?;
        self.check(g)?;
        check_step(step)?;
        match self.p {
            PNorm::Two => Ok(z.iter().zip(g).map(|(a, b)| a - step * b).collect()),
            PNorm::One => {
                if step == 0.0 {
                    return Ok(z.to_vec());
                }
                let mut y = self.gradient(z)?;
                for (yi, gi) in y.iter_mut().zip(g) {
                    *yi -= step * gi;
                }
                self.conjugate_gradient(&y)
            }
        }
    }
}

/// `d̄(x) = R²·d((x − u)/R)`: the base prox recentred at `u` with radius `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedProx {
    base: ProxSetup,
    center: Vec<f64>,
    radius: f64,
}

impl ShiftedProx {
    pub fn new(base: ProxSetup, center: Vec<f64>, radius: f64) -> Result<Self> {
        check_len(base.n(), center.len())?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(ShiftedProx {
            base,
            center,
            radius,
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn to_local(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, u)| (a - u) / self.radius).collect()
    }
}

impl Prox for ShiftedProx {
    fn setup(&self) -> &ProxSetup {
        &self.base
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_len(self.base.n(), x.len())?;
        Ok(self.radius * self.radius * self.base.value(&self.to_local(x))?)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.base.n(), x.len())?;
        let mut g = self.base.gradient(&self.to_local(x))?;
        g.iter_mut().for_each(|v| *v *= self.radius);
        Ok(g)
    }

    fn mirror_step(&self, z: &[f64], g: &[f64], step: f64) -> Result<Vec<f64>> {
        check_len(self.base.n(), z.len())?;
        check_len(self.base.n(), g.len())?;
        check_step(step)?;
        // In local coordinates w = (v − u)/R the step becomes a base step with
        // coefficient step/R.
        let w = self.base.mirror_step(&self.to_local(z), g, step / self.radius)?;
        Ok(w.iter().zip(&self.center).map(|(wi, u)| u + self.radius * wi).collect())
    }
}

/// Whether the sphere-moment bounds behind `ρₙ` are certified for `n`.
pub fn lemma_certified(n: usize) -> bool {
    n >= 8
}

/// `ρₙ = min{q − 1, 16 ln n − 8}·n^{2/q − 1}`, with `q − 1 = ∞` for `q = ∞`.
///
/// The formula is returned for any `n ≥ 2`; below `n = 8` the moment bounds
/// it stands for are not guaranteed and a warning is logged.
pub fn rho_constant(n: usize, q: DualIndex) -> f64 {
    if !lemma_certified(n) {
        log::warn!("n = {n} < 8: sphere-moment constant rho_n is not certified");
    }
    let nf = n as f64;
    let log_term = 16.0 * nf.ln() - 8.0;
    let lead = match q {
        DualIndex::Two => log_term.min(1.0),
        DualIndex::Inf => log_term,
    };
    lead * nf.powf(2.0 * q.reciprocal() - 1.0)
}

/// `Ω_p`: 1 for the Euclidean setup, `e·n^{(κ−1)(2−κ)/κ}·ln n` for `p = 1`.
pub fn omega_constant(setup: &ProxSetup) -> f64 {
    match setup.p {
        PNorm::Two => 1.0,
        PNorm::One => setup.coeff,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn randn(rng: &mut crate::rng::DirRng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn norms_of_three_four() {
        let x = [3.0, -4.0];
        assert_eq!(norm(&x, Norm::L2).unwrap(), 5.0);
        assert_eq!(norm(&x, Norm::L1).unwrap(), 7.0);
        assert_eq!(norm(&x, Norm::Inf).unwrap(), 4.0);
        assert_eq!(norm(&[], Norm::L2), Err(Error::Empty));
    }

    #[test]
    fn prox_values() {
        let two = ProxSetup::new(PNorm::Two, 2).unwrap();
        assert_eq!(two.value(&[1.0, 1.0]).unwrap(), 1.0);

        let one = ProxSetup::new(PNorm::One, 8).unwrap();
        assert_eq!(one.value(&[0.0; 8]).unwrap(), 0.0);
        let ln8 = 8f64.ln();
        let kappa = 1.0 + 1.0 / ln8;
        let c = std::f64::consts::E * 8f64.powf((kappa - 1.0) * (2.0 - kappa) / kappa) * ln8;
        let mut e1 = vec![0.0; 8];
        e1[0] = 1.0;
        assert!((one.value(&e1).unwrap() - c / 2.0).abs() < 1e-12);
        assert!((one.kappa() - kappa).abs() < 1e-15);
    }

    #[test]
    fn dimension_checks() {
        let s = ProxSetup::new(PNorm::Two, 3).unwrap();
        assert_eq!(s.value(&[1.0]), Err(Error::Dimension { expected: 3, got: 1 }));
        assert!(s.mirror_step(&[0.0; 3], &[0.0; 3], -1.0).is_err());
        assert!(ProxSetup::new(PNorm::One, 2).is_err());
        assert!(ProxSetup::new(PNorm::Two, 1).is_err());
    }

    #[test]
    fn kappa_in_range() {
        for n in 3..2000 {
            let s = ProxSetup::new(PNorm::One, n).unwrap();
            assert!(s.kappa() > 1.0 && s.kappa() <= 2.0, "n={n}");
            assert!(s.coeff() > 0.0);
        }
    }

    #[test]
    fn euclidean_gradient_is_identity() {
        let s = ProxSetup::new(PNorm::Two, 2).unwrap();
        assert_eq!(s.gradient(&[2.0, -3.0]).unwrap(), vec![2.0, -3.0]);
    }

    #[test]
    fn l1_gradient_at_origin_is_zero() {
        let s = ProxSetup::new(PNorm::One, 8).unwrap();
        assert_eq!(s.gradient(&[0.0; 8]).unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn l1_gradient_matches_central_differences() {
        let s = ProxSetup::new(PNorm::One, 8).unwrap();
        let mut rng = seeded(11);
        for _ in 0..20 {
            let x = randn(&mut rng, 8);
            let g = s.gradient(&x).unwrap();
            for i in 0..8 {
                let h = 1e-6 * x[i].abs().max(1e-3);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (s.value(&xp).unwrap() - s.value(&xm).unwrap()) / (2.0 * h);
                let rel = (fd - g[i]).abs() / g[i].abs().max(1e-8);
                assert!(rel < 1e-6, "i={i} fd={fd} g={}", g[i]);
            }
        }
    }

    #[test]
    fn bregman_examples() {
        let s = ProxSetup::new(PNorm::Two, 2).unwrap();
        assert_eq!(s.bregman(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        let one = ProxSetup::new(PNorm::One, 8).unwrap();
        let x = [0.3, -1.0, 2.0, 0.0, 0.1, 0.5, -0.2, 0.7];
        assert_eq!(one.bregman(&x, &x).unwrap(), 0.0);
        assert_eq!(s.bregman(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn strong_convexity_both_setups() {
        let mut rng = seeded(5);
        for (p, n) in [(PNorm::One, 8), (PNorm::One, 3), (PNorm::One, 50), (PNorm::Two, 8)] {
            let s = ProxSetup::new(p, n).unwrap();
            for _ in 0..1000 {
                let x = randn(&mut rng, n);
                let mut y = randn(&mut rng, n);
                if rng.random::<f64>() < 0.2 {
                    y.iter_mut().zip(&x).for_each(|(a, b)| *a = b + 1e-3 * *a);
                }
                let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                let lower = 0.5 * norm(&diff, p.primal()).unwrap().powi(2);
                let v = s.bregman(&x, &y).unwrap();
                assert!(v >= lower - 1e-9, "{p:?} n={n}: {v} < {lower}");
            }
        }
    }

    #[test]
    fn conjugate_roundtrip() {
        let mut rng = seeded(9);
        for n in [3, 8, 32, 257] {
            let s = ProxSetup::new(PNorm::One, n).unwrap();
            for _ in 0..50 {
                let x = randn(&mut rng, n);
                let back = s.conjugate_gradient(&s.gradient(&x).unwrap()).unwrap();
                let scale = norm(&x, Norm::Inf).unwrap();
                for (a, b) in x.iter().zip(&back) {
                    assert!((a - b).abs() <= 1e-8 * scale, "n={n}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn euclidean_mirror_step() {
        let s = ProxSetup::new(PNorm::Two, 2).unwrap();
        assert_eq!(s.mirror_step(&[1.0, 1.0], &[2.0, 0.0], 0.5).unwrap(), vec![0.0, 1.0]);
        let one = ProxSetup::new(PNorm::One, 4).unwrap();
        let z = [0.1, -0.2, 0.3, 0.0];
        assert_eq!(one.mirror_step(&z, &[1.0; 4], 0.0).unwrap(), z.to_vec());
    }

    #[test]
    fn mirror_step_first_order_condition() {
        let mut rng = seeded(21);
        for n in [8, 32] {
            let s = ProxSetup::new(PNorm::One, n).unwrap();
            for _ in 0..100 {
                let z = randn(&mut rng, n);
                let g = randn(&mut rng, n);
                let step: f64 = rng.random::<f64>() * 2.0;
                let zp = s.mirror_step(&z, &g, step).unwrap();
                let gz = s.gradient(&z).unwrap();
                let gzp = s.gradient(&zp).unwrap();
                let scale = gz.iter().chain(&g).fold(1.0_f64, |m, v| m.max(v.abs()));
                for i in 0..n {
                    let r = step * g[i] + gzp[i] - gz[i];
                    assert!(r.abs() <= 1e-6 * scale, "residual {r}");
                }
            }
        }
    }

    #[test]
    fn shifted_step_is_conjugated_base_step() {
        let mut rng = seeded(33);
        for p in [PNorm::One, PNorm::Two] {
            let base = ProxSetup::new(p, 6).unwrap();
            for _ in 0..50 {
                let u = randn(&mut rng, 6);
                let r = 0.1 + rng.random::<f64>() * 3.0;
                let sh = ShiftedProx::new(base.clone(), u.clone(), r).unwrap();
                let z = randn(&mut rng, 6);
                let g = randn(&mut rng, 6);
                let step = rng.random::<f64>();
                let direct = sh.mirror_step(&z, &g, step).unwrap();
                let local: Vec<f64> = z.iter().zip(&u).map(|(a, b)| (a - b) / r).collect();
                let w = base.mirror_step(&local, &g, step / r).unwrap();
                for i in 0..6 {
                    assert!((direct[i] - (u[i] + r * w[i])).abs() < 1e-12);
                }
                // d̄(u) = 0 and u minimises d̄.
                assert_eq!(sh.value(&u).unwrap(), 0.0);
                assert!(sh.value(&z).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn shifted_prox_is_strongly_convex() {
        let mut rng = seeded(34);
        let base = ProxSetup::new(PNorm::One, 10).unwrap();
        let sh = ShiftedProx::new(base, randn(&mut rng, 10), 0.37).unwrap();
        for _ in 0..500 {
            let x = randn(&mut rng, 10);
            let y = randn(&mut rng, 10);
            let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let lower = 0.5 * norm(&diff, Norm::L1).unwrap().powi(2);
            assert!(sh.bregman(&x, &y).unwrap() >= lower - 1e-9);
        }
    }

    #[test]
    fn rho_values() {
        assert_eq!(rho_constant(8, DualIndex::Two), 1.0);
        assert_eq!(rho_constant(1000, DualIndex::Two), 1.0);
        let r100 = rho_constant(100, DualIndex::Inf);
        assert!((r100 - (16.0 * 100f64.ln() - 8.0) / 100.0).abs() < 1e-15);
        assert!((r100 - 0.6568).abs() < 1e-4);
        let r8 = rho_constant(8, DualIndex::Inf);
        assert!((r8 - 3.159).abs() < 1e-3);
    }

    #[test]
    fn omega_values() {
        assert_eq!(ProxSetup::new(PNorm::Two, 8).unwrap().omega(), 1.0);
        assert_eq!(ProxSetup::new(PNorm::Two, 1000).unwrap().omega(), 1.0);
        let s8 = ProxSetup::new(PNorm::One, 8).unwrap();
        let k = 1.0 + 1.0 / 8f64.ln();
        let expect = std::f64::consts::E * 8f64.powf((k - 1.0) * (2.0 - k) / k) * 8f64.ln();
        assert!((s8.omega() - expect).abs() < 1e-12);
        let bound = std::f64::consts::E * std::f64::consts::E;
        let mut n = 8usize;
        while n <= 1_000_000 {
            let s = ProxSetup::new(PNorm::One, n).unwrap();
            assert!(s.omega() <= bound * (n as f64).ln(), "n={n}");
            n = n * 3 / 2 + 1;
        }
    }
}
