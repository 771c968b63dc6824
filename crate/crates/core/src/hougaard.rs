//! The Hougaard (Tweedie compound-Poisson-Gamma) subordinator driving the
//! intensity, and the law of the integrated increments `ΔY` it induces.
//!
//! With `α = (2−κ)/(κ−1)` and `k = μ^{1−κ}/(ρ(κ−1))`, `L` jumps at rate
//! `μ^{2−κ}/(ρ(2−κ))` with `Gamma(α, rate k)` sizes, and its Laplace exponent is
//! `Φ(z) = log E e^{zL(1)} = rate·[(1 − z/k)^{−α} − 1]` for `Re z < k`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::carma::CarmaSpec;
use crate::error::{Error, Result};
use crate::quad::{self, QuadConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct HougaardParams {
    pub mu: f64,
    pub rho: f64,
    pub kappa: f64,
}

#[derive(Deserialize)]
struct RawParams {
    mu: f64,
    rho: f64,
    kappa: f64,
}

impl TryFrom<RawParams> for HougaardParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        HougaardParams::new(raw.mu, raw.rho, raw.kappa)
    }
}

impl HougaardParams {
    pub fn new(mu: f64, rho: f64, kappa: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::invalid(format!("mu must be positive, got {mu}")));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::invalid(format!("rho must be positive, got {rho}")));
        }
        if !(kappa > 1.0 && kappa < 2.0) {
            return Err(Error::invalid(format!("kappa must lie in (1, 2), got {kappa}")));
        }
        Ok(Self { mu, rho, kappa })
    }

    pub fn mean(&self) -> f64 {
        self.mu
    }

    /// `Var L(1) = ρμ^κ`
    pub fn variance(&self) -> f64 {
        self.rho * self.mu.powf(self.kappa)
    }

    /// `κ₃(L(1)) = κρ²μ^{2κ−1}`
    pub fn third_cumulant(&self) -> f64 {
        self.kappa * self.rho * self.rho * self.mu.powf(2.0 * self.kappa - 1.0)
    }

    /// Cumulant of order 1, 2 or 3 of `L(1)`.
    pub fn cumulant(&self, n: u32) -> Result<f64> {
        match n {
            1 => Ok(self.mean()),
            2 => Ok(self.variance()),
            3 => Ok(self.third_cumulant()),
            _ => Err(Error::invalid(format!("cumulant order must be 1, 2 or 3, got {n}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompoundPoissonGamma {
    /// Jump arrivals per unit time.
    pub rate: f64,
    /// Gamma shape `α`.
    pub shape: f64,
    /// Gamma scale, in rainfall units.
    pub scale: f64,
}

impl CompoundPoissonGamma {
    pub fn mean(&self) -> f64 {
        self.rate * self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.rate * self.shape * (self.shape + 1.0) * self.scale * self.scale
    }

    /// Law of the jumps after the Esscher change `e^{θy}`, for `θ < 1/scale`:
    /// sizes become `Gamma(α, rate 1/scale − θ)` and arrivals speed up by
    /// `(1 − θ·scale)^{−α}`.
    pub fn tilted(&self, theta: f64) -> Result<Self> {
        let k = 1.0 / self.scale;
        if !(theta < k) {
            return Err(Error::MomentBound { argument: theta, bound: k });
        }
        if theta == 0.0 {
            // avoid the round trip through 1/scale
            return Ok(*self);
        }
        Ok(Self {
            rate: self.rate * (1.0 - theta * self.scale).powf(-self.shape),
            shape: self.shape,
            scale: 1.0 / (k - theta),
        })
    }
}

pub fn tweedie_to_cpg(params: &HougaardParams) -> Result<CompoundPoissonGamma> {
    let HougaardParams { mu, rho, kappa } = *params;
    if !(kappa > 1.0 && kappa < 2.0) {
        return Err(Error::invalid(format!("kappa must lie in (1, 2), got {kappa}")));
    }
    let shape = (2.0 - kappa) / (kappa - 1.0);
    let scale = rho * (kappa - 1.0) * mu.powf(kappa - 1.0);
    let cpg = CompoundPoissonGamma { rate: mu / (shape * scale), shape, scale };
    let (m, v) = (cpg.mean(), cpg.variance());
    if (m - mu).abs() > 1e-10 * mu || (v - params.variance()).abs() > 1e-10 * params.variance() {
        return Err(Error::invalid(format!(
            "compound Poisson conversion fails moment check: mean {m} vs {mu}, variance {v} vs {}",
            params.variance()
        )));
    }
    Ok(cpg)
}

/// `k = μ^{1−κ}/(ρ(κ−1))`; `E e^{zL(1)}` is finite exactly for `z < k`.
pub fn exp_moment_bound(params: &HougaardParams) -> f64 {
    params.mu.powf(1.0 - params.kappa) / (params.rho * (params.kappa - 1.0))
}

/// Lévy density `ν(y) = rate·k^α/Γ(α)·y^{α−1}e^{−ky}`.
pub fn levy_density(params: &HougaardParams, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::invalid(format!("Lévy density needs y > 0, got {y}")));
    }
    let cpg = tweedie_to_cpg(params)?;
    let k = exp_moment_bound(params);
    let a = cpg.shape;
    Ok((cpg.rate.ln() + a * k.ln() - ln_gamma(a) + (a - 1.0) * y.ln() - k * y).exp())
}

fn ln1p_complex(w: Complex64) -> Complex64 {
    if w.norm() < 0.05 {
        // alternating series; 14 terms reach machine precision for |w| < 0.05
        let mut term = w;
        let mut sum = Complex64::new(0.0, 0.0);
        for n in 1..=14 {
            sum += term / n as f64;
            term *= -w;
        }
        sum
    } else {
        (w + 1.0).ln()
    }
}

fn expm1_complex(w: Complex64) -> Complex64 {
    if w.norm() < 0.05 {
        let mut term = w;
        let mut sum = Complex64::new(0.0, 0.0);
        for n in 1..=14 {
            sum += term;
            term *= w / (n + 1) as f64;
        }
        sum
    } else {
        w.exp() - 1.0
    }
}

/// The Laplace exponent `Φ(z)` for `Re z < k`.
#[derive(Debug, Clone, Copy)]
pub struct LaplaceExponent {
    rate: f64,
    shape: f64,
    k: f64,
}

impl LaplaceExponent {
    pub fn new(params: &HougaardParams) -> Result<Self> {
        let cpg = tweedie_to_cpg(params)?;
        Ok(Self { rate: cpg.rate, shape: cpg.shape, k: exp_moment_bound(params) })
    }

    pub fn bound(&self) -> f64 {
        self.k
    }

    /// `Φ(z)`, without checking the domain.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.rate * expm1_complex(-self.shape * ln1p_complex(-z / self.k))
    }

    pub fn checked(&self, z: Complex64) -> Result<Complex64> {
        if !(z.re < self.k) {
            return Err(Error::MomentBound { argument: z.re, bound: self.k });
        }
        Ok(self.eval(z))
    }

    /// `Φ′(x) = μ(1 − x/k)^{−1/(κ−1)}` for real `x < k`.
    pub fn derivative(&self, x: f64) -> f64 {
        self.rate * self.shape / self.k * (1.0 - x / self.k).powf(-self.shape - 1.0)
    }
}

/// `ψ_θ(z) = ∫(e^{zy} − 1)e^{θy}ν(dy) = Φ(θ + z) − Φ(θ)`, requiring `Re z + θ < k`.
pub fn psi_theta(params: &HougaardParams, theta: f64, z: Complex64) -> Result<Complex64> {
    let phi = LaplaceExponent::new(params)?;
    let total = phi.checked(z + theta)?;
    Ok(total - phi.eval(Complex64::new(theta, 0.0)))
}

/// A finite sum `Σ cᵢ e^{−rᵢ s}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpSum(pub Vec<(f64, f64)>);

impl ExpSum {
    pub fn eval(&self, s: f64) -> f64 {
        self.0.iter().map(|(c, r)| c * (-r * s).exp()).sum()
    }

    pub fn mul(&self, other: &ExpSum) -> ExpSum {
        let mut out = Vec::with_capacity(self.0.len() * other.0.len());
        for &(c1, r1) in &self.0 {
            for &(c2, r2) in &other.0 {
                out.push((c1 * c2, r1 + r2));
            }
        }
        ExpSum(out)
    }

    pub fn pow(&self, n: u32) -> ExpSum {
        (0..n).fold(ExpSum(vec![(1.0, 0.0)]), |acc, _| acc.mul(self))
    }

    /// `∫₀^T`, with `T = ∞` allowed when every rate is positive.
    pub fn integral(&self, upper: f64) -> f64 {
        self.0
            .iter()
            .map(|&(c, r)| {
                if r == 0.0 {
                    c * upper
                } else if upper.is_infinite() {
                    c / r
                } else {
                    -c * (-r * upper).exp_m1() / r
                }
            })
            .sum()
    }
}

/// Loadings of the driving noise on one increment of `Y` over `[0, δ]`:
/// `ΔY = ∫_{−∞}^0 g₁(−u)dL(u) + ∫_0^δ g₂(u)dL(u)` with
/// `g₁(s) = Σ wₖ(e^{−λₖs} − e^{−λₖ(δ+s)})/λₖ` and `g₂(s) = Σ wₖ(1 − e^{−λₖ(δ−s)})/λₖ`.
#[derive(Debug, Clone)]
pub struct IncrementLoadings {
    pub delta: f64,
    /// `g₁` as an exponential sum in `s`.
    pub g1: ExpSum,
    /// `g₂(δ − v)` as an exponential sum in `v ∈ [0, δ]`.
    pub g2_reversed: ExpSum,
    min_rate: f64,
}

impl IncrementLoadings {
    pub fn new(spec: &CarmaSpec, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("step must be positive, got {delta}")));
        }
        let g1 = ExpSum(
            spec.components()
                .map(|(l, w)| (-w * (-l * delta).exp_m1() / l, l))
                .collect(),
        );
        let mut g2 = vec![(spec.kernel_mass(), 0.0)];
        g2.extend(spec.components().map(|(l, w)| (-w / l, l)));
        Ok(Self { delta, g1, g2_reversed: ExpSum(g2), min_rate: spec.min_lambda() })
    }

    pub fn g1(&self, s: f64) -> f64 {
        self.g1.eval(s)
    }

    pub fn g2(&self, s: f64) -> f64 {
        self.g2_reversed.eval(self.delta - s)
    }

    /// Largest loading, `g₁(0) = g₂(0)`.
    pub fn max_loading(&self) -> f64 {
        self.g1.eval(0.0)
    }

    /// `∫₀^∞ g₁ⁿ + ∫₀^δ g₂ⁿ`
    pub fn power_integral(&self, n: u32) -> f64 {
        self.g1.pow(n).integral(f64::INFINITY) + self.g2_reversed.pow(n).integral(self.delta)
    }

    /// Upper end for the `g₁` integral such that the neglected tail of
    /// `∫g₁` stays below `tail_tol`.
    pub fn truncation(&self, tail_tol: f64) -> f64 {
        let mut s = 40.0 / self.min_rate;
        let tail = |s: f64| -> f64 { self.g1.0.iter().map(|(c, r)| c.abs() * (-r * s).exp() / r).sum() };
        while tail(s) > tail_tol && s < 1e12 {
            s *= 2.0;
        }
        s
    }
}

/// `log E e^{zΔY} = ∫₀^∞ Φ(z g₁(s))ds + ∫₀^δ Φ(z g₂(s))ds`, by adaptive quadrature.
pub fn log_mgf_increment(
    spec: &CarmaSpec,
    params: &HougaardParams,
    delta: f64,
    z: Complex64,
) -> Result<Complex64> {
    let phi = LaplaceExponent::new(params)?;
    let loads = IncrementLoadings::new(spec, delta)?;
    let top = z.re.max(0.0) * loads.max_loading();
    if !(top < phi.bound()) {
        return Err(Error::MomentBound { argument: top, bound: phi.bound() });
    }
    let cfg = QuadConfig::default().with_abs_tol(1e-13).with_rel_tol(1e-13);
    let upper = loads.truncation(1e-13 / (z.norm() * params.mu).max(1e-300));
    let mut total = quad::integrate(|s| phi.eval(z * loads.g1(s)), 0.0, upper, &cfg)?.value;
    total += quad::integrate(|s| phi.eval(z * loads.g2(s)), 0.0, delta, &cfg)?.value;
    Ok(total)
}

/// Characteristic function `E e^{iuΔY}` of one increment over a step of length `delta`.
pub fn charfn_increment(spec: &CarmaSpec, params: &HougaardParams, delta: f64, u: f64) -> Result<Complex64> {
    if u == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(log_mgf_increment(spec, params, delta, Complex64::new(0.0, u))?.exp())
}

/// Cumulant of order `n ∈ {1, 2, 3}` of `ΔY`: `κₙ(L(1))·(∫₀^∞ g₁ⁿ + ∫₀^δ g₂ⁿ)`.
pub fn cumulants_increment(spec: &CarmaSpec, params: &HougaardParams, delta: f64, n: u32) -> Result<f64> {
    let c = params.cumulant(n)?;
    Ok(c * IncrementLoadings::new(spec, delta)?.power_integral(n))
}

/// Cumulants of `ΔY` by Cauchy's integral formula applied to the log
/// moment generating function on a circle well inside its domain.
pub fn cumulants_by_contour(spec: &CarmaSpec, params: &HougaardParams, delta: f64, n_max: u32) -> Result<Vec<f64>> {
    let loads = IncrementLoadings::new(spec, delta)?;
    let radius = exp_moment_bound(params) / (4.0 * loads.max_loading());
    let points = 64;
    let values: Vec<(f64, Complex64)> = (0..points)
        .map(|j| {
            let angle = 2.0 * PI * j as f64 / points as f64;
            let z = Complex64::from_polar(radius, angle);
            Ok((angle, log_mgf_increment(spec, params, delta, z)?))
        })
        .collect::<Result<_>>()?;
    Ok((1..=n_max)
        .map(|n| {
            let sum: Complex64 = values
                .iter()
                .map(|(angle, k)| k * Complex64::from_polar(1.0, -(n as f64) * angle))
                .sum();
            let factorial: f64 = (1..=n).map(|i| i as f64).product();
            factorial * sum.re / (points as f64 * radius.powi(n as i32))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carma::acvf_increments;
    use statrs::function::gamma::gamma;

    fn detroit() -> HougaardParams {
        HougaardParams::new(4.55, 14.85, 1.62).unwrap()
    }

    fn heathrow() -> HougaardParams {
        HougaardParams::new(2.15, 143.01, 1.85).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn validation() {
        assert!(HougaardParams::new(1.0, 1.0, 2.0).is_err());
        assert!(HougaardParams::new(1.0, 1.0, 1.0).is_err());
        assert!(HougaardParams::new(0.0, 1.0, 1.5).is_err());
        assert!(HougaardParams::new(1.0, -1.0, 1.5).is_err());
        assert!(serde_json::from_str::<HougaardParams>(r#"{"mu":1,"rho":1,"kappa":2.5}"#).is_err());
        let p: HougaardParams = serde_json::from_str(r#"{"mu":4.55,"rho":14.85,"kappa":1.62}"#).unwrap();
        assert_eq!(p, detroit());
    }

    #[test]
    fn cpg_moments_on_kappa_grid() {
        for kappa in [1.1, 1.3, 1.5, 1.7, 1.9, 1.99] {
            let p = HougaardParams::new(2.3, 7.0, kappa).unwrap();
            let c = tweedie_to_cpg(&p).unwrap();
            assert!(rel(c.mean(), p.mu) < 1e-10);
            assert!(rel(c.variance(), p.variance()) < 1e-10);
            assert!(c.rate.is_finite() && c.shape > 0.0);
        }
    }

    #[test]
    fn exp_moment_bound_examples() {
        assert!((exp_moment_bound(&HougaardParams::new(1.0, 1.0, 1.5).unwrap()) - 2.0).abs() < 1e-15);
        let k = exp_moment_bound(&detroit());
        assert!((k - 0.0425).abs() < 5e-4, "k = {k}");
        assert_eq!((k * 1000.0).round() / 1000.0, 0.042);
    }

    #[test]
    fn levy_density_matches_closed_constant() {
        let p = detroit();
        let (mu, rho, kappa) = (p.mu, p.rho, p.kappa);
        let e = 1.0 / (kappa - 1.0);
        for y in [0.01f64, 0.5, 3.0, 40.0] {
            let direct = 1.0 / (rho.powf(e) * gamma(kappa * e) * (kappa - 1.0).powf(kappa * e))
                * y.powf((3.0 - 2.0 * kappa) * e)
                * (-mu.powf(1.0 - kappa) * y / (rho * (kappa - 1.0))).exp();
            assert!(rel(levy_density(&p, y).unwrap(), direct) < 1e-12);
        }
        assert!(levy_density(&p, 0.0).is_err());
    }

    #[test]
    fn levy_density_moments() {
        for p in [detroit(), heathrow()] {
            let k = exp_moment_bound(&p);
            let cfg = QuadConfig::default().with_rel_tol(1e-12).with_abs_tol(0.0);
            // y^{α}e^{−ky} is integrable at 0; split at 1/k
            let m1 = quad::integrate(|y| y * levy_density(&p, y).unwrap(), 0.0, 1.0 / k, &cfg).unwrap().value
                + quad::integrate_to_infinity(|y| y * levy_density(&p, y).unwrap(), 1.0 / k, 1.0 / k, 1e6 / k, &cfg)
                    .unwrap()
                    .value;
            let m2 = quad::integrate(|y| y * y * levy_density(&p, y).unwrap(), 0.0, 1.0 / k, &cfg).unwrap().value
                + quad::integrate_to_infinity(|y| y * y * levy_density(&p, y).unwrap(), 1.0 / k, 1.0 / k, 1e6 / k, &cfg)
                    .unwrap()
                    .value;
            assert!(rel(m1, p.mu) < 1e-8, "{m1}");
            assert!(rel(m2, p.variance()) < 1e-8, "{m2}");
        }
    }

    #[test]
    fn exponential_moment_diverges_past_bound() {
        let p = heathrow();
        let k = exp_moment_bound(&p);
        let cfg = QuadConfig::default();
        // ν(y)e^{ky} is a pure power, so multiply it by e^{(t−k)y} without overflow
        let unit = levy_density(&p, 1.0).unwrap() * k.exp();
        let alpha = tweedie_to_cpg(&p).unwrap().shape;
        let mass = |t: f64, upper: f64| {
            quad::integrate(|y: f64| unit * y.powf(alpha - 1.0) * ((t - k) * y).exp(), 1.0 / k, upper, &cfg)
                .unwrap()
                .value
        };
        // below the bound the tail settles; above it keeps growing
        let below = (mass(0.99 * k, 4000.0 / k), mass(0.99 * k, 8000.0 / k));
        let above = (mass(1.01 * k, 4000.0 / k), mass(1.01 * k, 8000.0 / k));
        assert!(rel(below.1, below.0) < 1e-6);
        assert!(above.1 > 1e10 * above.0);
    }

    #[test]
    fn psi_vanishes_at_zero() {
        for theta in [-0.5, 0.0, 0.02, 0.04] {
            assert_eq!(psi_theta(&detroit(), theta, Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(0.0, 0.0));
        }
        assert!(psi_theta(&detroit(), 0.05, Complex64::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn psi_matches_levy_quadrature() {
        let p = detroit();
        let k = exp_moment_bound(&p);
        let cfg = QuadConfig::default().with_abs_tol(1e-13).with_rel_tol(1e-13);
        for u in [0.1, 1.0, 5.0] {
            let f = |y: f64| (Complex64::new(0.0, u * y).exp() - 1.0) * levy_density(&p, y).unwrap();
            let mut oracle = quad::integrate(f, 0.0, 1.0, &cfg).unwrap().value;
            oracle += quad::integrate(f, 1.0, 1.0 / k, &cfg).unwrap().value;
            oracle += quad::integrate_to_infinity(f, 1.0 / k, 1.0 / k, 1e6 / k, &cfg).unwrap().value;
            let got = psi_theta(&p, 0.0, Complex64::new(0.0, u)).unwrap();
            assert!((got - oracle).norm() < 1e-8 * oracle.norm().max(1.0), "u = {u}: {got} vs {oracle}");
        }
    }

    #[test]
    fn psi_derivative_is_tilted_mean() {
        let p = detroit();
        let k = exp_moment_bound(&p);
        for theta in [-0.1, 0.0, 0.02, 0.04] {
            let h = 1e-4 * (k - theta);
            let up = psi_theta(&p, theta, Complex64::new(h, 0.0)).unwrap().re;
            let down = psi_theta(&p, theta, Complex64::new(-h, 0.0)).unwrap().re;
            let numeric = (up - down) / (2.0 * h);
            let closed = p.mu * (1.0 - theta / k).powf(-1.0 / (p.kappa - 1.0));
            assert!(rel(numeric, closed) < 1e-6, "theta {theta}");
            assert!(rel(LaplaceExponent::new(&p).unwrap().derivative(theta), closed) < 1e-12);
        }
    }

    #[test]
    fn tilted_cpg_mean() {
        let p = detroit();
        let k = exp_moment_bound(&p);
        let t = tweedie_to_cpg(&p).unwrap().tilted(0.02).unwrap();
        assert!(rel(t.mean(), p.mu * (1.0 - 0.02 / k).powf(-1.0 / (p.kappa - 1.0))) < 1e-12);
    }

    #[test]
    fn charfn_basic_properties() {
        let spec = CarmaSpec::ou(4.54).unwrap();
        let p = detroit();
        assert_eq!(charfn_increment(&spec, &p, 1.0, 0.0).unwrap(), Complex64::new(1.0, 0.0));
        for u in -10..=10 {
            let u = u as f64;
            let c = charfn_increment(&spec, &p, 1.0, u).unwrap();
            assert!(c.norm() <= 1.0 + 1e-12);
            let m = charfn_increment(&spec, &p, 1.0, -u).unwrap();
            assert!((m - c.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn charfn_derivative_gives_mean() {
        let spec = CarmaSpec::ou(4.54).unwrap();
        let p = detroit();
        let h = 1e-4;
        let d = (charfn_increment(&spec, &p, 1.0, h).unwrap() - charfn_increment(&spec, &p, 1.0, -h).unwrap())
            / (2.0 * h);
        let mean = p.mu / 4.54;
        assert!(d.re.abs() < 1e-6);
        assert!(rel(d.im, mean) < 1e-6);
        assert!(rel(cumulants_increment(&spec, &p, 1.0, 1).unwrap(), mean) < 1e-14);
    }

    #[test]
    fn variance_cumulant_matches_autocovariance() {
        for (lambda, delta) in [(4.54, 1.0), (0.3, 2.0), (9.0, 0.25)] {
            let spec = CarmaSpec::ou(lambda).unwrap();
            let p = heathrow();
            let c0 = acvf_increments(&spec, p.variance(), delta, 0).unwrap()[0];
            assert!(rel(cumulants_increment(&spec, &p, delta, 2).unwrap(), c0) < 1e-10);
        }
        let spec = CarmaSpec::new(vec![4.79, 0.31], vec![0.92, 0.08]).unwrap();
        let c0 = acvf_increments(&spec, 3.0, 1.0, 0).unwrap()[0];
        let p = HougaardParams::new(1.0, 3.0, 1.5).unwrap();
        assert!(rel(cumulants_increment(&spec, &p, 1.0, 2).unwrap(), c0) < 1e-10);
    }

    #[test]
    fn power_integrals_against_quadrature() {
        let spec = CarmaSpec::new(vec![4.79, 0.31], vec![0.92, 0.08]).unwrap();
        let l = IncrementLoadings::new(&spec, 1.5).unwrap();
        let cfg = QuadConfig::default().with_abs_tol(1e-14);
        for n in 1..=3 {
            let oracle = quad::integrate_to_infinity(|s| l.g1(s).powi(n), 0.0, 1.0, 1e5, &cfg).unwrap().value
                + quad::integrate(|s| l.g2(s).powi(n), 0.0, 1.5, &cfg).unwrap().value;
            assert!(rel(l.power_integral(n as u32), oracle) < 1e-10);
        }
        assert!((l.g1(0.0) - l.g2(0.0)).abs() < 1e-15);
        assert!(l.g2(1.5).abs() < 1e-15);
    }

    #[test]
    fn contour_cumulants_agree_with_closed_form() {
        for (spec, p) in [
            (CarmaSpec::ou(4.54).unwrap(), detroit()),
            (CarmaSpec::new(vec![4.79, 0.31], vec![0.92, 0.08]).unwrap(), heathrow()),
        ] {
            let oracle = cumulants_by_contour(&spec, &p, 1.0, 3).unwrap();
            for n in 1..=3 {
                let closed = cumulants_increment(&spec, &p, 1.0, n).unwrap();
                assert!(rel(oracle[n as usize - 1], closed) < 1e-5, "n = {n}: {} vs {closed}", oracle[n as usize - 1]);
            }
        }
    }
}
