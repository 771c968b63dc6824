//! CARMA(p, p−1) intensity kernels in spectral form and their implied
//! discrete-time ARMA(p, p) representation.
//!
//! The intensity kernel is `h(s) = Σᵢ wᵢ e^{−λᵢ s}` with `Σ wᵢ = 1`. Rates are
//! expressed per grid step of the data the kernel describes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;

/// Highest supported kernel order.
pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightConstraint {
    /// All weights non-negative, so the intensity kernel is non-negative.
    #[default]
    NonNegative,
    /// Weights of either sign, provided the kernel stays non-negative.
    Unrestricted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCarmaSpec", into = "RawCarmaSpec")]
pub struct CarmaSpec {
    lambdas: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawCarmaSpec {
    p: usize,
    lambdas: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawCarmaSpec> for CarmaSpec {
    type Error = Error;
    fn try_from(raw: RawCarmaSpec) -> Result<Self> {
        if raw.p != raw.lambdas.len() {
            return Err(Error::invalid(format!(
                "p = {} but {} decay rates given",
                raw.p,
                raw.lambdas.len()
            )));
        }
        CarmaSpec::with_constraint(raw.lambdas, raw.weights, WeightConstraint::Unrestricted)
    }
}

impl From<CarmaSpec> for RawCarmaSpec {
    fn from(spec: CarmaSpec) -> Self {
        RawCarmaSpec { p: spec.p(), lambdas: spec.lambdas, weights: spec.weights }
    }
}

impl CarmaSpec {
    /// Ornstein–Uhlenbeck kernel `e^{−λs}`.
    pub fn ou(lambda: f64) -> Result<Self> {
        Self::new(vec![lambda], vec![1.0])
    }

    pub fn new(lambdas: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::with_constraint(lambdas, weights, WeightConstraint::NonNegative)
    }

    pub fn with_constraint(lambdas: Vec<f64>, weights: Vec<f64>, constraint: WeightConstraint) -> Result<Self> {
        let p = lambdas.len();
        if p == 0 || p > MAX_ORDER {
            return Err(Error::invalid(format!("kernel order must be in 1..={MAX_ORDER}, got {p}")));
        }
        if weights.len() != p {
            return Err(Error::invalid(format!("{p} decay rates but {} weights", weights.len())));
        }
        if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::invalid(format!("decay rates must be finite and positive, got {l}")));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weights must be finite"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("weights must sum to 1, got {sum}")));
        }
        if constraint == WeightConstraint::NonNegative && weights.iter().any(|&w| w < 0.0) {
            return Err(Error::invalid("negative weight under the non-negative constraint"));
        }

        let mut pairs: Vec<(f64, f64)> = lambdas.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        for w in pairs.windows(2) {
            if w[0].0 - w[1].0 <= 1e-9 * w[0].0 {
                return Err(Error::invalid(format!("decay rates must be distinct, got {} twice", w[0].0)));
            }
        }
        let spec = CarmaSpec {
            lambdas: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        };
        if constraint == WeightConstraint::Unrestricted && spec.weights.iter().any(|&w| w < 0.0) {
            let horizon = 40.0 / spec.min_lambda();
            let negative = (0..=4000)
                .map(|i| horizon * i as f64 / 4000.0)
                .find(|&s| spec.kernel(s) < -1e-14);
            if let Some(s) = negative {
                return Err(Error::invalid(format!("intensity kernel is negative at s = {s}")));
            }
        }
        Ok(spec)
    }

    pub fn p(&self) -> usize {
        self.lambdas.len()
    }

    /// Decay rates, in descending order.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn min_lambda(&self) -> f64 {
        self.lambdas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn components(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lambdas.iter().copied().zip(self.weights.iter().copied())
    }

    /// `h(s) = Σ wᵢ e^{−λᵢ s}`
    pub fn kernel(&self, s: f64) -> f64 {
        self.components().map(|(l, w)| w * (-l * s).exp()).sum()
    }

    /// `∫₀^∞ h = Σ wᵢ/λᵢ`; the mean of `ΔY` per unit `L`-mean and unit time.
    pub fn kernel_mass(&self) -> f64 {
        self.components().map(|(l, w)| w / l).sum()
    }

    /// Same kernel with every rate expressed in a time unit `factor` times longer.
    pub fn rescale_time(&self, factor: f64) -> Result<Self> {
        Self::with_constraint(
            self.lambdas.iter().map(|l| l * factor).collect(),
            self.weights.clone(),
            WeightConstraint::Unrestricted,
        )
    }
}

/// The polynomials `a(x) = Π(x + λᵢ)` and `b(x) = Σᵢ wᵢ Π_{j≠i}(x + λⱼ)`,
/// so that `wᵢ = b(−λᵢ)/a′(−λᵢ)`. With `Σwᵢ = 1`, `b` is monic of degree `p−1`.
///
/// Fails when `a` and `b` share a root, which happens exactly when a weight vanishes.
pub fn spectral_to_polynomials(spec: &CarmaSpec) -> Result<(Poly, Poly)> {
    let (a, b) = polynomials_unchecked(spec);
    let scale = spec.lambdas.iter().fold(1.0, |acc, l| acc * (1.0 + l));
    for &l in spec.lambdas() {
        if b.eval(-l).abs() <= 1e-12 * scale {
            return Err(Error::CommonRoot { root: -l });
        }
    }
    Ok((a, b))
}

fn polynomials_unchecked(spec: &CarmaSpec) -> (Poly, Poly) {
    let neg: Vec<f64> = spec.lambdas.iter().map(|l| -l).collect();
    let a = Poly::from_roots(&neg);
    let mut b = Poly(vec![0.0]);
    for (i, &w) in spec.weights.iter().enumerate() {
        let others: Vec<f64> = neg.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, r)| *r).collect();
        b = b.add(&Poly::from_roots(&others).scale(w));
    }
    (a, b)
}

/// Spectral coefficients `β(λⱼ) = σ² wⱼ Σᵢ wᵢ/(λᵢ + λⱼ)`, the weights of the
/// intensity autocovariance `γ_X(τ) = Σⱼ β(λⱼ) e^{−λⱼ τ}`.
pub fn spectral_betas(spec: &CarmaSpec, sigma2: f64) -> Vec<f64> {
    spec.components()
        .map(|(lj, wj)| sigma2 * wj * spec.components().map(|(li, wi)| wi / (li + lj)).sum::<f64>())
        .collect()
}

/// The same coefficients through the polynomial form `σ² b(−λ)b(λ) / (a′(−λ)a(λ))`.
pub fn spectral_betas_polynomial(spec: &CarmaSpec, sigma2: f64) -> Vec<f64> {
    let (a, b) = polynomials_unchecked(spec);
    let da = a.derivative();
    spec.lambdas
        .iter()
        .map(|&l| sigma2 * b.eval(-l) * b.eval(l) / (da.eval(-l) * a.eval(l)))
        .collect()
}

/// Autocovariances `C(0..=h_max)` of the increments `ΔY` over steps of length `delta`,
/// when `L(1)` has variance `sigma2`.
pub fn acvf_increments(spec: &CarmaSpec, sigma2: f64, delta: f64, h_max: usize) -> Result<Vec<f64>> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid(format!("driving variance must be positive, got {sigma2}")));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("step must be positive, got {delta}")));
    }
    let betas = spectral_betas(spec, sigma2);
    let comps: Vec<(f64, f64)> = spec.lambdas.iter().copied().zip(betas).collect();
    let mut out = Vec::with_capacity(h_max + 1);
    out.push(
        comps
            .iter()
            .map(|&(l, beta)| 2.0 * beta / (l * l) * ((-l * delta).exp_m1() + l * delta))
            .sum(),
    );
    for h in 1..=h_max {
        out.push(
            comps
                .iter()
                .map(|&(l, beta)| {
                    let e = (-l * delta).exp_m1();
                    beta / (l * l) * e * e * (-l * (h - 1) as f64 * delta).exp()
                })
                .sum(),
        );
    }
    Ok(out)
}

/// Discrete ARMA(p, q) model `φ(B)X = θ(B)ε` with
/// `φ(z) = 1 − φ₁z − … − φₚzᵖ` and `θ(z) = 1 + θ₁z + … + θ_q z^q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaSpec {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
}

impl ArmaSpec {
    pub fn white_noise() -> Self {
        Self { phi: Vec::new(), theta: Vec::new() }
    }

    pub fn ar_polynomial(&self) -> Poly {
        let mut c = vec![1.0];
        c.extend(self.phi.iter().map(|p| -p));
        Poly(c)
    }

    pub fn ma_polynomial(&self) -> Poly {
        let mut c = vec![1.0];
        c.extend(self.theta.iter().copied());
        Poly(c)
    }

    fn roots_outside_unit_circle(poly: &Poly) -> Result<bool> {
        Ok(poly.roots()?.iter().all(|r| r.norm() > 1.0 + 1e-10))
    }

    pub fn is_causal(&self) -> Result<bool> {
        Self::roots_outside_unit_circle(&self.ar_polynomial())
    }

    pub fn is_invertible(&self) -> Result<bool> {
        Self::roots_outside_unit_circle(&self.ma_polynomial())
    }

    /// ψ-weights of the causal MA(∞) representation, truncated once negligible.
    pub fn psi_weights(&self, max_terms: usize) -> Vec<f64> {
        let mut psi = vec![1.0];
        let mut peak: f64 = 1.0;
        let mut quiet = 0;
        for j in 1..max_terms {
            let mut v = self.theta.get(j - 1).copied().unwrap_or(0.0);
            for (k, phi) in self.phi.iter().enumerate() {
                if k < j {
                    v += phi * psi[j - 1 - k];
                }
            }
            psi.push(v);
            peak = peak.max(v.abs());
            if j > self.theta.len() + self.phi.len() && v.abs() < 1e-280 * peak {
                quiet += 1;
                if quiet > self.phi.len() + 2 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        psi
    }

    /// Autocovariances at lags `0..=h_max` for innovation variance `sigma2`,
    /// by summing products of ψ-weights.
    pub fn autocovariance(&self, sigma2: f64, h_max: usize) -> Vec<f64> {
        let psi = self.psi_weights(200_000);
        (0..=h_max)
            .map(|h| sigma2 * psi.iter().zip(psi.iter().skip(h)).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpliedArma {
    pub arma: ArmaSpec,
    pub innovation_variance: f64,
}

/// Closed-form ARMA(1,1) image of an OU kernel with rate `lambda` on steps `delta`.
pub fn ou_to_arma(lambda: f64, delta: f64) -> (f64, f64) {
    let x = lambda * delta;
    let e1 = (-x).exp();
    let e2 = (-2.0 * x).exp();
    let r = (1.0 - x - e2 * (1.0 + x)) / (1.0 - 2.0 * x * e1 - e2);
    (e1, -r - (r * r - 1.0).sqrt())
}

/// Maps a kernel to the weak ARMA(p, p) followed by its integrated increments.
///
/// The AR part has roots `e^{λᵢδ}`; the MA part and innovation variance are the
/// invertible spectral factor of the MA(p) autocovariance left after applying
/// the AR filter to the increment autocovariances.
pub fn carma_to_arma(spec: &CarmaSpec, sigma2: f64, delta: f64) -> Result<ImpliedArma> {
    let p = spec.p();
    let target = acvf_increments(spec, sigma2, delta, 2 * p)?;
    let ar_roots: Vec<f64> = spec.lambdas.iter().map(|l| (-l * delta).exp()).collect();
    // Π(1 − zᵢB), ascending coefficients
    let filter = ar_roots
        .iter()
        .fold(Poly::one(), |acc, &z| acc.mul(&Poly(vec![1.0, -z])));
    let c = filter.coeffs();
    let phi: Vec<f64> = c[1..].iter().map(|v| -v).collect();

    let gamma_w: Vec<f64> = (0..=p)
        .map(|k| {
            let mut s = 0.0;
            for (i, ci) in c.iter().enumerate() {
                for (j, cj) in c.iter().enumerate() {
                    let lag = (k as isize + j as isize - i as isize).unsigned_abs();
                    s += ci * cj * target[lag];
                }
            }
            s
        })
        .collect();

    if p == 1 {
        let (_, theta) = ou_to_arma(spec.lambdas[0], delta);
        let innovation_variance = gamma_w[1] / theta;
        return Ok(ImpliedArma {
            arma: ArmaSpec { phi, theta: vec![theta] },
            innovation_variance,
        });
    }

    let theta = factor_ma(&gamma_w)?;
    let norm: f64 = 1.0 + theta.iter().map(|t| t * t).sum::<f64>();
    Ok(ImpliedArma {
        arma: ArmaSpec { phi, theta },
        innovation_variance: gamma_w[0] / norm,
    })
}

/// Invertible MA(q) coefficients whose autocovariance is proportional to
/// `gamma[0..=q]`, from the roots of `z^q Σ_{|k|≤q} γ(|k|) zᵏ`.
pub fn factor_ma(gamma: &[f64]) -> Result<Vec<f64>> {
    let q = gamma.len() - 1;
    if q == 0 {
        return Ok(Vec::new());
    }
    let laurent = Poly((0..=2 * q).map(|j| gamma[j.abs_diff(q)]).collect());
    let roots = laurent.roots()?;
    if let Some(r) = roots.iter().find(|r| (r.norm() - 1.0).abs() < 1e-8) {
        return Err(Error::Factorization(format!(
            "root {r} on the unit circle, no invertible factor"
        )));
    }
    let mut outside: Vec<Complex64> = roots.into_iter().filter(|r| r.norm() > 1.0).collect();
    if outside.len() != q {
        return Err(Error::Factorization(format!(
            "expected {q} roots outside the unit circle, found {}",
            outside.len()
        )));
    }
    outside.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    // θ(z) = Π(1 − z/rᵢ)
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for r in &outside {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c / r;
        }
        coeffs = next;
    }
    if coeffs.iter().any(|c| c.im.abs() > 1e-8 * (1.0 + c.re.abs())) {
        return Err(Error::Factorization("moving-average factor has complex coefficients".into()));
    }
    Ok(coeffs[1..].iter().map(|c| c.re).collect())
}

#[derive(Debug, Clone)]
pub struct PredictionErrors {
    pub residuals: Vec<f64>,
    /// Normalised one-step mean-square errors `rᵢ = vᵢ/σ²`.
    pub mse_ratios: Vec<f64>,
    /// `Σ eᵢ²/rᵢ`
    pub weighted_sse: f64,
}

/// One-step prediction errors of the sample-mean-centred data under `arma`.
pub fn one_step_prediction_errors(arma: &ArmaSpec, data: &[f64]) -> Result<PredictionErrors> {
    let mean = data.iter().sum::<f64>() / data.len().max(1) as f64;
    one_step_prediction_errors_about(arma, data, mean)
}

/// Innovations-algorithm one-step prediction errors of `data − mean`.
///
/// Uses the transformed process `W` of Ansley (1979), whose covariance is
/// banded, so the cost is `O(n·q²)`. The recursion is frozen once `θₙ,ⱼ` and
/// `rₙ` stop changing.
pub fn one_step_prediction_errors_about(arma: &ArmaSpec, data: &[f64], mean: f64) -> Result<PredictionErrors> {
    if !arma.is_invertible()? || !arma.is_causal()? {
        return Err(Error::NonInvertible);
    }
    let p = arma.phi.len();
    let q = arma.theta.len();
    let m = p.max(q);
    let n = data.len();
    let x: Vec<f64> = data.iter().map(|v| v - mean).collect();
    if n == 0 {
        return Ok(PredictionErrors { residuals: Vec::new(), mse_ratios: Vec::new(), weighted_sse: 0.0 });
    }
    let gamma = arma.autocovariance(1.0, 2 * m + 1);
    let theta_full: Vec<f64> = std::iter::once(1.0).chain(arma.theta.iter().copied()).collect();

    // κ(i, j), 1-based
    let kappa = |i: usize, j: usize| -> f64 {
        let (lo, hi) = (i.min(j), i.max(j));
        let d = hi - lo;
        if hi <= m {
            gamma[d]
        } else if lo <= m && hi <= 2 * m {
            let mut v = gamma[d];
            for (r, phi) in arma.phi.iter().enumerate() {
                v -= phi * gamma[((r + 1) as isize - d as isize).unsigned_abs()];
            }
            v
        } else if lo > m {
            (0..=q)
                .filter(|r| r + d <= q)
                .map(|r| theta_full[r] * theta_full[r + d])
                .sum()
        } else {
            0.0
        }
    };

    // thetas[k][j-1] = θ_{k,j}
    let mut thetas: Vec<Vec<f64>> = vec![Vec::new()];
    let mut v: Vec<f64> = vec![kappa(1, 1)];
    let mut frozen: Option<(Vec<f64>, f64)> = None;

    let mut residuals = Vec::with_capacity(n);
    let mut mse_ratios = Vec::with_capacity(n);
    let mut xhat = vec![0.0; n];
    residuals.push(x[0]);
    mse_ratios.push(v[0]);

    for step in 1..n {
        // predict x[step] (= X_{step+1}) from X_1..X_step
        let (theta_n, v_n) = if let Some((th, vv)) = &frozen {
            (th.clone(), *vv)
        } else {
            let len_n = if step < m { step } else { step.min(q) };
            let mut th = vec![0.0; len_n];
            for k in step.saturating_sub(len_n)..step {
                let mut s = kappa(step + 1, k + 1);
                for j in 0..k {
                    let a = step - j; // index into θ_{step,·}
                    let b = k - j; // index into θ_{k,·}
                    if a <= len_n && b <= thetas[k].len() {
                        s -= thetas[k][b - 1] * th[a - 1] * v[j];
                    }
                }
                th[step - k - 1] = s / v[k];
            }
            let mut vn = kappa(step + 1, step + 1);
            for j in step.saturating_sub(len_n)..step {
                let t = th[step - j - 1];
                vn -= t * t * v[j];
            }
            if vn <= 0.0 {
                return Err(Error::NonInvertible);
            }
            if step > 2 * m + 2 {
                let prev = &thetas[step - 1];
                let stable = prev.len() == th.len()
                    && prev.iter().zip(&th).all(|(a, b)| (a - b).abs() < 1e-15)
                    && (v[step - 1] - vn).abs() < 1e-15;
                if stable {
                    frozen = Some((th.clone(), vn));
                }
            }
            thetas.push(th.clone());
            v.push(vn);
            (th, vn)
        };

        let mut pred = 0.0;
        if step >= m {
            for (i, phi) in arma.phi.iter().enumerate() {
                pred += phi * x[step - 1 - i];
            }
        }
        for (j, t) in theta_n.iter().enumerate() {
            let idx = step - 1 - j;
            pred += t * (x[idx] - xhat[idx]);
        }
        xhat[step] = pred;
        residuals.push(x[step] - pred);
        mse_ratios.push(v_n);
    }

    let weighted_sse = residuals.iter().zip(&mse_ratios).map(|(e, r)| e * e / r).sum();
    Ok(PredictionErrors { residuals, mse_ratios, weighted_sse })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn spec_validation() {
        assert!(CarmaSpec::new(vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(CarmaSpec::new(vec![1.0, 2.0], vec![0.6, 0.6]).is_err());
        assert!(CarmaSpec::new(vec![-1.0], vec![1.0]).is_err());
        assert!(CarmaSpec::new(vec![2.0, 1.0], vec![1.5, -0.5]).is_err());
        assert!(CarmaSpec::new(vec![1.0, 2.0, 3.0, 4.0], vec![0.25; 4]).is_err());
        // sorted descending, weights follow their rates
        let s = CarmaSpec::new(vec![0.31, 4.79], vec![0.08, 0.92]).unwrap();
        assert_eq!(s.lambdas(), &[4.79, 0.31]);
        assert_eq!(s.weights(), &[0.92, 0.08]);
    }

    #[test]
    fn unrestricted_weights_need_nonnegative_kernel() {
        // h(s) = 1.5e^{-2s} − 0.5e^{-s} is negative for large s
        assert!(CarmaSpec::with_constraint(vec![2.0, 1.0], vec![1.5, -0.5], WeightConstraint::Unrestricted).is_err());
        // h(s) = 1.5e^{-s} − 0.5e^{-2s} stays positive
        assert!(CarmaSpec::with_constraint(vec![2.0, 1.0], vec![-0.5, 1.5], WeightConstraint::Unrestricted).is_ok());
    }

    #[test]
    fn json_schema() {
        let s = CarmaSpec::new(vec![4.79, 0.31], vec![0.92, 0.08]).unwrap();
        let j = serde_json::to_value(&s).unwrap();
        assert_eq!(j["p"], 2);
        let back: CarmaSpec = serde_json::from_value(j).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<CarmaSpec>(r#"{"p":1,"lambdas":[1.0],"weights":[0.5]}"#).is_err());
    }

    #[test]
    fn ou_polynomials() {
        let (a, b) = spectral_to_polynomials(&CarmaSpec::ou(4.54).unwrap()).unwrap();
        assert_eq!(a, Poly(vec![4.54, 1.0]));
        assert_eq!(b, Poly(vec![1.0]));
    }

    #[test]
    fn two_component_polynomials_reproduce_weights() {
        let spec = CarmaSpec::new(vec![2.0, 1.0], vec![0.5, 0.5]).unwrap();
        let (a, b) = spectral_to_polynomials(&spec).unwrap();
        // a = x² + 3x + 2; b monic of degree 1 solving b(−λ)/a′(−λ) = w
        assert_eq!(a, Poly(vec![2.0, 3.0, 1.0]));
        assert!((b.coeffs()[1] - 1.0).abs() < 1e-15);
        let da = a.derivative();
        for (l, w) in spec.components() {
            assert!((b.eval(-l) / da.eval(-l) - w).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_weight_gives_common_root() {
        let spec = CarmaSpec::new(vec![2.0, 1.0], vec![1.0, 0.0]).unwrap();
        match spectral_to_polynomials(&spec) {
            Err(Error::CommonRoot { root }) => assert_eq!(root, -1.0),
            other => panic!("expected common root, got {other:?}"),
        }
        // the kernel itself degenerates to the single rate
        let ou = CarmaSpec::ou(2.0).unwrap();
        assert!((spec.kernel(0.7) - ou.kernel(0.7)).abs() < 1e-15);
    }

    #[test]
    fn betas_two_routes_agree() {
        let spec = CarmaSpec::new(vec![4.79, 0.31], vec![0.92, 0.08]).unwrap();
        for (x, y) in spectral_betas(&spec, 2.5).iter().zip(spectral_betas_polynomial(&spec, 2.5)) {
            assert!(rel(*x, y) < 1e-12);
        }
    }

    #[test]
    fn ou_acvf_matches_closed_form() {
        let (lambda, delta, s2) = (4.54, 1.0, 14.85 * 4.55f64.powf(1.62));
        let c = acvf_increments(&CarmaSpec::ou(lambda).unwrap(), s2, delta, 3).unwrap();
        let x = lambda * delta;
        let c0 = s2 / lambda.powi(3) * ((-x).exp() + x - 1.0);
        let c1 = s2 / (2.0 * lambda.powi(3)) * ((-x).exp() - 1.0).powi(2);
        assert!(rel(c[0], c0) < 1e-12);
        assert!(rel(c[1], c1) < 1e-12);
        assert!(rel(c[2] / c[1], (-x).exp()) < 1e-14);
        assert!(rel(c[3] / c[2], (-x).exp()) < 1e-14);
    }

    #[test]
    fn acvf_rejects_nonpositive_variance() {
        assert!(acvf_increments(&CarmaSpec::ou(1.0).unwrap(), 0.0, 1.0, 2).is_err());
    }

    #[test]
    fn implied_arma_reproduces_acvf() {
        for spec in [
            CarmaSpec::ou(4.54).unwrap(),
            CarmaSpec::ou(0.2).unwrap(),
            CarmaSpec::new(vec![4.79, 0.31], vec![0.92, 0.08]).unwrap(),
            CarmaSpec::new(vec![3.0, 1.0, 0.1], vec![0.5, 0.3, 0.2]).unwrap(),
        ] {
            let target = acvf_increments(&spec, 3.0, 1.0, 20).unwrap();
            let implied = carma_to_arma(&spec, 3.0, 1.0).unwrap();
            assert!(implied.arma.is_invertible().unwrap());
            let got = implied.arma.autocovariance(implied.innovation_variance, 20);
            for h in 0..=20 {
                assert!(rel(got[h], target[h]) < 1e-8, "lag {h}: {} vs {}", got[h], target[h]);
            }
        }
    }

    #[test]
    fn ou_closed_form_matches_factorisation() {
        for lambda in [0.05, 0.5, 4.54, 9.0] {
            let (_, theta) = ou_to_arma(lambda, 1.0);
            let c = acvf_increments(&CarmaSpec::ou(lambda).unwrap(), 1.0, 1.0, 2).unwrap();
            let z = (-lambda).exp();
            let g0 = c[0] * (1.0 + z * z) - 2.0 * z * c[1];
            let g1 = c[1] * (1.0 + z * z) - z * c[0] - z * c[2];
            let generic = factor_ma(&[g0, g1]).unwrap();
            assert!(rel(theta, generic[0]) < 1e-9, "lambda {lambda}");
        }
    }

    #[test]
    fn ou_map_is_injective_on_grid() {
        let images: Vec<(f64, f64)> = (0..200)
            .map(|i| 0.05 + (10.0 - 0.05) * i as f64 / 199.0)
            .map(|l| ou_to_arma(l, 1.0))
            .collect();
        for i in 0..images.len() {
            for j in i + 1..images.len() {
                let d = (images[i].0 - images[j].0).abs() + (images[i].1 - images[j].1).abs();
                assert!(d > 0.0);
            }
        }
        // large rates drive the AR coefficient to zero
        assert!(ou_to_arma(40.0, 1.0).0 < 1e-17);
    }

    #[test]
    fn white_noise_residuals_are_centered_data() {
        let data = [1.0, 3.0, -2.0, 0.5];
        let pe = one_step_prediction_errors(&ArmaSpec::white_noise(), &data).unwrap();
        let m = 2.5 / 4.0;
        for (e, d) in pe.residuals.iter().zip(data) {
            assert!((e - (d - m)).abs() < 1e-15);
        }
        assert!(pe.mse_ratios.iter().all(|r| (r - 1.0).abs() < 1e-15));
    }

    #[test]
    fn arma11_residuals_recover_innovations() {
        use rand::{Rng, SeedableRng};
        let (phi, theta) = (0.6, 0.4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let eps: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut x = vec![0.0; eps.len()];
        x[0] = eps[0];
        for t in 1..eps.len() {
            x[t] = phi * x[t - 1] + eps[t] + theta * eps[t - 1];
        }
        let arma = ArmaSpec { phi: vec![phi], theta: vec![theta] };
        let pe = one_step_prediction_errors_about(&arma, &x, 0.0).unwrap();
        for t in 200..x.len() {
            assert!((pe.residuals[t] - eps[t]).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn non_invertible_rejected() {
        let arma = ArmaSpec { phi: vec![], theta: vec![1.5] };
        assert!(matches!(one_step_prediction_errors(&arma, &[1.0, 2.0]), Err(Error::NonInvertible)));
    }
}
