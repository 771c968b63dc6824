//! Esscher-transform pricing of contracts on the index `Y(τ₂) − Y(τ₁)`.
//!
//! Under the pricing measure the jumps of `L` at time `v` are tilted by
//! `e^{θ(v)y}`, so `log E_Q exp(z∫c dL) = ∫ψ_θ(v, z c(v)) dv` with
//! `ψ_θ(z) = Φ(θ + z) − Φ(θ)`. Conditional on the state at the valuation
//! time `t`,
//!
//! ```text
//! Y(τ₂) − Y(τ₁) = M + ∫_t^{τ₁} D(v) dL(v) + ∫_{τ₁}^{τ₂} g(τ₂, v) dL(v)
//! g(τ, v) = Σ wₖ(1 − e^{−λₖ(τ−v)})/λₖ,    D(v) = g(τ₂, v) − g(τ₁, v)
//! M       = Σ wₖ Xₖ(t)(e^{−λₖ(τ₁−t)} − e^{−λₖ(τ₂−t)})/λₖ
//! ```
//!
//! Contracts are dated in calendar time and the market price of risk is given
//! in days after valuation. Everything is converted to model time units (the
//! units of λ) on entry.

use std::fmt;
use std::sync::Arc;

use chrono::{Datelike, NaiveDateTime};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calendar;
use crate::carma::CarmaSpec;
use crate::error::{Error, Result};
use crate::hougaard::{exp_moment_bound, tweedie_to_cpg, CompoundPoissonGamma, HougaardParams, LaplaceExponent};
use crate::optim::brent_root;
use crate::quad::{self, QuadConfig};
use crate::seasonality::MonthlyLevels;
use crate::simulate::{sample_jumps, stream_rng, Jump};
use crate::timeseries::Unit;

const MM_PER_INCH: f64 = 25.4;

/// Grid resolution for the sup-norm checks on the loading and on θ.
const CHECK_POINTS: usize = 2000;

/// Calibration searches θ in `(−50k, k(1 − 1e−9))`.
const CALIBRATION_LOWER: f64 = -50.0;
const CALIBRATION_UPPER: f64 = 1.0 - 1e-9;

fn unit_factor(from: Unit, to: Unit) -> f64 {
    match (from, to) {
        (Unit::Mm, Unit::Inch) => 1.0 / MM_PER_INCH,
        (Unit::Inch, Unit::Mm) => MM_PER_INCH,
        _ => 1.0,
    }
}

/// A fitted intensity model ready for pricing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingModel {
    pub spec: CarmaSpec,
    pub params: HougaardParams,
    /// Length of one model time unit in days: 1 for a daily fit, 1/24 for hourly.
    pub step_days: f64,
    /// Unit of the rainfall data the model describes.
    pub unit: Unit,
}

impl PricingModel {
    pub fn new(spec: CarmaSpec, params: HougaardParams, step_days: f64, unit: Unit) -> Result<Self> {
        if !(step_days.is_finite() && step_days > 0.0) {
            return Err(Error::invalid(format!("model time step must be positive, got {step_days} days")));
        }
        tweedie_to_cpg(&params)?;
        Ok(Self { spec, params, step_days, unit })
    }

    /// Exponential moment bound `k`; every θ must stay strictly below it.
    pub fn bound(&self) -> f64 {
        exp_moment_bound(&self.params)
    }

    fn model_time(&self, days: f64) -> f64 {
        days / self.step_days
    }

    /// Stationary mean of the component intensities, `Xₖ = μ/λₖ`.
    pub fn mean_components(&self) -> Vec<f64> {
        self.spec.lambdas().iter().map(|l| self.params.mu / l).collect()
    }
}

/// A swap on the rainfall accumulated over `[start, end)`, valued at `valuation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapContract {
    pub valuation: NaiveDateTime,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub label: String,
    pub unit: Unit,
}

impl SwapContract {
    pub fn new(
        valuation: NaiveDateTime,
        start: NaiveDateTime,
        end: NaiveDateTime,
        label: impl Into<String>,
        unit: Unit,
    ) -> Result<Self> {
        if !(valuation < start && start < end) {
            return Err(Error::invalid(format!(
                "contract needs valuation < start < end, got {valuation} / {start} / {end}"
            )));
        }
        Ok(Self { valuation, start, end, label: label.into(), unit })
    }

    /// The calendar-month contract, labelled like `Mar 11`.
    pub fn monthly(valuation: NaiveDateTime, year: i32, month: u32, unit: Unit) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::invalid(format!("month must be in 1..=12, got {month}")));
        }
        let start = calendar::month_start(year, month);
        let end = if month == 12 {
            calendar::month_start(year + 1, 1)
        } else {
            calendar::month_start(year, month + 1)
        };
        Self::new(valuation, start, end, start.format("%b %y").to_string(), unit)
    }

    /// Calendar month of the accumulation start; selects the seasonal level.
    pub fn month(&self) -> u32 {
        self.start.month()
    }

    /// Days from valuation to the start and to the end of the window.
    pub fn window_days(&self) -> (f64, f64) {
        (
            calendar::days_between(self.valuation, self.start),
            calendar::days_between(self.valuation, self.end),
        )
    }
}

/// One constant piece of the market price of risk, in days after valuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MprPiece {
    pub start: f64,
    pub end: f64,
    pub theta: f64,
}

/// Piecewise-constant market price of risk `θ(v)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EsscherMPR {
    pieces: Vec<MprPiece>,
}

impl EsscherMPR {
    /// Pieces must be contiguous and ordered, with every θ below the bound of `params`.
    pub fn new(pieces: Vec<MprPiece>, params: &HougaardParams) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::invalid("market price of risk needs at least one piece"));
        }
        let k = exp_moment_bound(params);
        for (i, p) in pieces.iter().enumerate() {
            if !(p.start < p.end) || p.start.is_nan() || p.end.is_nan() {
                return Err(Error::invalid(format!("piece {i} is empty: [{}, {}]", p.start, p.end)));
            }
            if !p.theta.is_finite() {
                return Err(Error::invalid(format!("piece {i} has non-finite theta {}", p.theta)));
            }
            if !(p.theta < k) {
                return Err(Error::MomentBound { argument: p.theta, bound: k });
            }
            if i > 0 && pieces[i - 1].end != p.start {
                return Err(Error::invalid(format!(
                    "pieces {} and {i} are not contiguous: {} then {}",
                    i - 1,
                    pieces[i - 1].end,
                    p.start
                )));
            }
        }
        Ok(Self { pieces })
    }

    /// `θ` constant from valuation onwards.
    pub fn constant(theta: f64, params: &HougaardParams) -> Result<Self> {
        Self::new(vec![MprPiece { start: 0.0, end: f64::MAX, theta }], params)
    }

    pub fn pieces(&self) -> &[MprPiece] {
        &self.pieces
    }

    pub fn theta_at(&self, day: f64) -> Option<f64> {
        self.pieces.iter().find(|p| p.start <= day && day < p.end).map(|p| p.theta)
    }

    /// Pieces restricted to `[0, horizon]` days, failing if they leave a gap.
    fn covering(&self, horizon: f64) -> Result<Vec<MprPiece>> {
        let first = self.pieces[0].start;
        let last = self.pieces[self.pieces.len() - 1].end;
        if first > 0.0 || last < horizon {
            return Err(Error::invalid(format!(
                "market price of risk covers [{first}, {last}] days, contract needs [0, {horizon}]"
            )));
        }
        Ok(self
            .pieces
            .iter()
            .filter(|p| p.end > 0.0 && p.start < horizon)
            .map(|p| MprPiece { start: p.start.max(0.0), end: p.end.min(horizon), theta: p.theta })
            .collect())
    }
}

/// What is known at the valuation time about the intensity components `Xₖ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservedState {
    /// Replace the unobserved state by its stationary mean.
    #[default]
    MeanApproximation,
    /// Component intensities known exactly.
    Components { values: Vec<f64> },
    /// Deseasonalised increments `ΔY`, `delta` model units apart, the last
    /// ending at the valuation time. The state is reconstructed approximately
    /// by placing one jump at the centre of each interval.
    Increments { values: Vec<f64>, delta: f64 },
}

impl ObservedState {
    pub fn components(&self, model: &PricingModel) -> Result<Vec<f64>> {
        let p = model.spec.p();
        match self {
            ObservedState::MeanApproximation => Ok(model.mean_components()),
            ObservedState::Components { values } => {
                if values.len() != p {
                    return Err(Error::invalid(format!("state has {} components, model has {p}", values.len())));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::invalid("state components must be finite and non-negative"));
                }
                Ok(values.clone())
            }
            ObservedState::Increments { values, delta } => reconstruct_components(model, values, *delta),
        }
    }
}

fn reconstruct_components(model: &PricingModel, increments: &[f64], delta: f64) -> Result<Vec<f64>> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!("increment spacing must be positive, got {delta}")));
    }
    let spec = &model.spec;
    let mut state = model.mean_components();
    // a jump at the interval centre contributes J·Σw(1 − e^{−λδ/2})/λ
    let half_loading: f64 = spec.components().map(|(l, w)| w * -(-l * delta / 2.0).exp_m1() / l).sum();
    for (i, &dy) in increments.iter().enumerate() {
        if !(dy.is_finite() && dy >= 0.0) {
            return Err(Error::NegativeValue { row: i, value: dy });
        }
        let carried: f64 = spec
            .components()
            .zip(&state)
            .map(|((l, w), x)| w * x * -(-l * delta).exp_m1() / l)
            .sum();
        let jump = ((dy - carried) / half_loading).max(0.0);
        for ((l, _), x) in spec.components().zip(state.iter_mut()) {
            *x = *x * (-l * delta).exp() + jump * (-l * delta / 2.0).exp();
        }
    }
    Ok(state)
}

/// Moves component intensities forward by `elapsed` model units, adding
/// `jumps` timed in `[0, elapsed]` relative to the current state.
pub fn advance_components(spec: &CarmaSpec, state: &[f64], jumps: &[Jump], elapsed: f64) -> Vec<f64> {
    spec.lambdas()
        .iter()
        .zip(state)
        .map(|(l, x)| {
            x * (-l * elapsed).exp()
                + jumps
                    .iter()
                    .filter(|j| j.time <= elapsed)
                    .map(|j| j.size * (-l * (elapsed - j.time)).exp())
                    .sum::<f64>()
        })
        .collect()
}

/// A contract resolved into model time, with valuation at 0.
#[derive(Debug, Clone)]
struct Window {
    tau1: f64,
    tau2: f64,
    /// `(a, b, θ)` in model time, covering `[0, τ₂]`.
    segments: Vec<(f64, f64, f64)>,
    /// The `𝓕_t`-measurable part `M`.
    known: f64,
}

impl Window {
    fn build(model: &PricingModel, mpr: &EsscherMPR, contract: &SwapContract, state: &ObservedState) -> Result<Self> {
        let (d1, d2) = contract.window_days();
        let pieces = mpr.covering(d2)?;
        let k = model.bound();
        if let Some(p) = pieces.iter().find(|p| !(p.theta < k)) {
            return Err(Error::MomentBound { argument: p.theta, bound: k });
        }
        let tau1 = model.model_time(d1);
        let tau2 = model.model_time(d2);
        let x = state.components(model)?;
        let known = model
            .spec
            .components()
            .zip(&x)
            .map(|((l, w), x)| w * x * ((-l * tau1).exp() - (-l * tau2).exp()) / l)
            .sum();
        let segments = pieces
            .iter()
            .map(|p| (model.model_time(p.start), model.model_time(p.end), p.theta))
            .collect();
        Ok(Self { tau1, tau2, segments, known })
    }

    /// Loading of a jump at `v` on the index: `D(v)` before `τ₁`, `g(τ₂, v)` inside the window.
    fn loading(&self, spec: &CarmaSpec, v: f64) -> f64 {
        if v < 0.0 || v > self.tau2 {
            0.0
        } else if v < self.tau1 {
            spec.components()
                .map(|(l, w)| w * ((-l * (self.tau1 - v)).exp() - (-l * (self.tau2 - v)).exp()) / l)
                .sum()
        } else {
            spec.components().map(|(l, w)| w * -(-l * (self.tau2 - v)).exp_m1() / l).sum()
        }
    }

    /// `∫_a^b` of the loading, in closed form, for `[a, b]` on one side of `τ₁`.
    fn loading_integral(&self, spec: &CarmaSpec, a: f64, b: f64) -> f64 {
        let (t1, t2) = (self.tau1, self.tau2);
        if b <= t1 {
            spec.components()
                .map(|(l, w)| {
                    let e = |s: f64| (-l * s).exp();
                    w / (l * l) * ((e(t1 - b) - e(t1 - a)) - (e(t2 - b) - e(t2 - a)))
                })
                .sum()
        } else {
            spec.components()
                .map(|(l, w)| w / l * ((b - a) - ((-l * (t2 - b)).exp() - (-l * (t2 - a)).exp()) / l))
                .sum()
        }
    }

    /// Integration pieces split at segment boundaries and at `τ₁`.
    fn pieces(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &(a, b, theta) in &self.segments {
            if a < self.tau1 && self.tau1 < b {
                out.push((a, self.tau1, theta));
                out.push((self.tau1, b, theta));
            } else {
                out.push((a, b, theta));
            }
        }
        out
    }

    fn sup_abs_theta(&self) -> f64 {
        self.segments.iter().map(|s| s.2.abs()).fold(0.0, f64::max)
    }

    fn sup_loading(&self, spec: &CarmaSpec) -> f64 {
        let mut sup = self.loading(spec, self.tau1).abs();
        for i in 0..=CHECK_POINTS {
            let v = self.tau2 * i as f64 / CHECK_POINTS as f64;
            sup = sup.max(self.loading(spec, v).abs());
        }
        sup
    }

    /// `sup_v (δ|c(v)| + |θ(v)|) < k` on a grid including every breakpoint.
    fn check_hypothesis(&self, spec: &CarmaSpec, damping: f64, k: f64) -> Result<()> {
        let mut worst: f64 = 0.0;
        let mut probe = |v: f64, theta: f64| {
            worst = worst.max(damping * self.loading(spec, v).abs() + theta.abs());
        };
        for &(a, b, theta) in &self.segments {
            let n = ((CHECK_POINTS as f64 * (b - a) / self.tau2).ceil() as usize).max(2);
            for i in 0..=n {
                probe(a + (b - a) * i as f64 / n as f64, theta);
            }
            if a < self.tau1 && self.tau1 <= b {
                probe(self.tau1, theta);
            }
        }
        if worst < k {
            Ok(())
        } else {
            Err(Error::MomentBound { argument: worst, bound: k })
        }
    }
}

/// `E_Q[Y(τ₂) − Y(τ₁) | 𝓕_t]` through `Φ′(θ) = μ(1 − θ/k)^{−1/(κ−1)}`.
fn expected_index(model: &PricingModel, window: &Window) -> Result<f64> {
    let phi = LaplaceExponent::new(&model.params)?;
    let mut total = window.known;
    for (a, b, theta) in window.pieces() {
        total += phi.derivative(theta) * window.loading_integral(&model.spec, a, b);
    }
    Ok(total)
}

/// Swap price `S_m·E_Q[Y(τ₂) − Y(τ₁) | 𝓕_t]` in the contract's unit, with
/// `S_m` the seasonal level of the contract month.
pub fn futures_price(
    model: &PricingModel,
    mpr: &EsscherMPR,
    contract: &SwapContract,
    seasonality: &dyn MonthlyLevels,
    state: &ObservedState,
) -> Result<f64> {
    let window = Window::build(model, mpr, contract, state)?;
    let level = seasonality.monthly_level(contract.month())?;
    Ok(level * expected_index(model, &window)? * unit_factor(model.unit, contract.unit))
}

/// Bilateral Laplace transform `F(z) = ∫ f(x)e^{−zx} dx` of a real payoff.
#[derive(Clone)]
pub struct CustomTransform(pub Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>);

impl fmt::Debug for CustomTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomTransform")
    }
}

/// Payoffs as functions of the index `x = Y(τ₂) − Y(τ₁)`; the index is non-negative.
#[derive(Debug, Clone)]
pub enum Payoff {
    /// `x`
    Swap,
    /// `(x − K)⁺`
    Call { strike: f64 },
    /// `min((x − K)⁺, C − K)`
    CappedCall { strike: f64, cap: f64 },
    /// Caller guarantees `F(δ + iξ)` is integrable in `ξ` at the chosen damping.
    Custom(CustomTransform),
}

impl Payoff {
    /// `F(z)` for `Re z > 0`.
    pub fn transform(&self, z: Complex64) -> Complex64 {
        let z2 = z * z;
        match self {
            Payoff::Swap => z2.inv(),
            Payoff::Call { strike } => (-z * *strike).exp() / z2,
            Payoff::CappedCall { strike, cap } => ((-z * *strike).exp() - (-z * *cap).exp()) / z2,
            Payoff::Custom(t) => (t.0)(z),
        }
    }

    /// Payoff value, unavailable for transform-only payoffs.
    pub fn value(&self, x: f64) -> Option<f64> {
        match self {
            Payoff::Swap => Some(x),
            Payoff::Call { strike } => Some((x - strike).max(0.0)),
            Payoff::CappedCall { strike, cap } => Some((x - strike).max(0.0).min(cap - strike)),
            Payoff::Custom(_) => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Payoff::Call { strike } if !(strike >= 0.0) => {
                Err(Error::invalid(format!("strike must be non-negative, got {strike}")))
            }
            Payoff::CappedCall { strike, cap } if !(strike >= 0.0 && cap > strike) => {
                Err(Error::invalid(format!("capped call needs 0 <= strike < cap, got {strike}, {cap}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PayoffSpec {
    pub payoff: Payoff,
    /// Damping `δ > 0`; chosen automatically for built-in payoffs when absent.
    pub damping: Option<f64>,
}

impl PayoffSpec {
    pub fn new(payoff: Payoff) -> Self {
        Self { payoff, damping: None }
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = Some(damping);
        self
    }
}

/// Result of the Fourier evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierValue {
    pub value: f64,
    pub damping: f64,
    pub error: f64,
}

fn inner_config() -> QuadConfig {
    QuadConfig::default().with_abs_tol(1e-14).with_rel_tol(1e-12)
}

/// `zM + ∫ψ_θ(v, z c(v)) dv` over `[0, τ₂]`.
fn log_transform(model: &PricingModel, phi: &LaplaceExponent, window: &Window, z: Complex64) -> Result<Complex64> {
    let cfg = inner_config();
    let mut total = z * window.known;
    for (a, b, theta) in window.pieces() {
        let base = phi.eval(Complex64::new(theta, 0.0));
        let est = quad::integrate(
            |v| phi.eval(z * window.loading(&model.spec, v) + theta) - base,
            a,
            b,
            &cfg,
        )?;
        total += est.value;
    }
    Ok(total)
}

/// `E_Q[e^{iu(Y(τ₂) − Y(τ₁))} | 𝓕_t]`.
pub fn conditional_charfn(
    model: &PricingModel,
    mpr: &EsscherMPR,
    contract: &SwapContract,
    state: &ObservedState,
    u: f64,
) -> Result<Complex64> {
    let window = Window::build(model, mpr, contract, state)?;
    let k = model.bound();
    window.check_hypothesis(&model.spec, 0.0, k)?;
    let phi = LaplaceExponent::new(&model.params)?;
    Ok(log_transform(model, &phi, &window, Complex64::new(0.0, u))?.exp())
}

/// `E_Q[f(Y(τ₂) − Y(τ₁)) | 𝓕_t]` by Fourier inversion along `Re z = δ`:
///
/// ```text
/// (1/π) Re ∫₀^∞ F(δ + iξ) exp{zM + ∫ψ_θ(v, z c(v)) dv} dξ
/// ```
pub fn riskneutral_expectation(
    model: &PricingModel,
    mpr: &EsscherMPR,
    contract: &SwapContract,
    payoff: &PayoffSpec,
    state: &ObservedState,
) -> Result<FourierValue> {
    payoff.payoff.validate()?;
    let window = Window::build(model, mpr, contract, state)?;
    let k = model.bound();
    let spec = &model.spec;
    let sup_theta = window.sup_abs_theta();
    if !(sup_theta < k) {
        return Err(Error::MomentBound { argument: sup_theta, bound: k });
    }
    let sup_c = window.sup_loading(spec);
    let damping = match (payoff.damping, &payoff.payoff) {
        (Some(d), _) => d,
        (None, Payoff::Custom(_)) => {
            return Err(Error::invalid("custom payoffs need an explicit damping"));
        }
        (None, _) => 0.5 * (k - sup_theta) / sup_c,
    };
    if !(damping > 0.0 && damping.is_finite()) {
        return Err(Error::invalid(format!("damping must be positive, got {damping}")));
    }
    window.check_hypothesis(spec, damping, k)?;

    let phi = LaplaceExponent::new(&model.params)?;
    // the index has mean of order E_Q; its oscillation sets the first panel
    let scale = expected_index(model, &window)?.abs() + sup_c;
    let mut failure = None;
    let integrand = |xi: f64| -> f64 {
        let z = Complex64::new(damping, xi);
        match log_transform(model, &phi, &window, z) {
            Ok(lt) => (payoff.payoff.transform(z) * lt.exp()).re,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let cfg = QuadConfig::default().with_abs_tol(1e-13).with_rel_tol(1e-11);
    let est = quad::integrate_to_infinity(integrand, 0.0, 1.0 / scale, 1e9, &cfg)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(FourierValue {
        value: est.value / std::f64::consts::PI,
        damping,
        error: est.error / std::f64::consts::PI,
    })
}

/// Constant `θ` such that the model swap price equals `market_price`.
pub fn calibrate_theta(
    model: &PricingModel,
    contract: &SwapContract,
    seasonality: &dyn MonthlyLevels,
    market_price: f64,
    state: &ObservedState,
) -> Result<f64> {
    if !(market_price.is_finite() && market_price > 0.0) {
        return Err(Error::invalid(format!("market price must be positive, got {market_price}")));
    }
    let k = model.bound();
    let (_, horizon) = contract.window_days();
    let price_at = |theta: f64| -> Result<f64> {
        let mpr = EsscherMPR::new(vec![MprPiece { start: 0.0, end: horizon, theta }], &model.params)?;
        futures_price(model, &mpr, contract, seasonality, state)
    };
    let lo = CALIBRATION_LOWER * k;
    let hi = CALIBRATION_UPPER * k;
    let (p_lo, p_hi) = (price_at(lo)?, price_at(hi)?);
    if !(p_lo < market_price && market_price < p_hi) {
        return Err(Error::NotBracketed { lo, hi, f_lo: p_lo - market_price, f_hi: p_hi - market_price });
    }
    // the price is smooth and increasing, so errors inside the bracket cannot occur
    brent_root(|t| price_at(t).map(|p| p - market_price).unwrap_or(f64::NAN), lo, hi, 1e-15, 300)
}

/// Jump law of `L` after tilting by a constant `θ`.
pub fn tilted_law(params: &HougaardParams, theta: f64) -> Result<CompoundPoissonGamma> {
    let k = exp_moment_bound(params);
    if !(theta < k) {
        return Err(Error::MomentBound { argument: theta, bound: k });
    }
    tweedie_to_cpg(params)?.tilted(theta)
}

/// Jumps of `L` on `[0, horizon]` under the measure tilted by a constant `θ`.
/// `θ = 0` reproduces the physical jump stream for the same seed.
pub fn tilted_simulation(params: &HougaardParams, theta: f64, horizon: f64, seed: u64) -> Result<Vec<Jump>> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::invalid(format!("horizon must be non-negative, got {horizon}")));
    }
    let law = tilted_law(params, theta)?;
    sample_jumps(&law, 0.0, horizon, &mut stream_rng(seed, 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
}

/// Simulated values of `Y(τ₂) − Y(τ₁)` under the tilted measure, one per path.
pub fn tilted_index_paths(
    model: &PricingModel,
    mpr: &EsscherMPR,
    contract: &SwapContract,
    state: &ObservedState,
    paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let window = Window::build(model, mpr, contract, state)?;
    let laws = window
        .segments
        .iter()
        .map(|&(a, b, theta)| Ok((a, b, tilted_law(&model.params, theta)?)))
        .collect::<Result<Vec<_>>>()?;
    (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let mut value = window.known;
            for (a, b, law) in &laws {
                for j in sample_jumps(law, *a, *b, &mut rng)? {
                    value += j.size * window.loading(&model.spec, j.time);
                }
            }
            Ok(value)
        })
        .collect()
}

/// Monte Carlo estimate of `E_Q[f(Y(τ₂) − Y(τ₁)) | 𝓕_t]`.
pub fn tilted_monte_carlo(
    model: &PricingModel,
    mpr: &EsscherMPR,
    contract: &SwapContract,
    state: &ObservedState,
    payoff: &Payoff,
    paths: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if paths < 2 {
        return Err(Error::invalid(format!("need at least 2 paths, got {paths}")));
    }
    let values = tilted_index_paths(model, mpr, contract, state, paths, seed)?
        .into_iter()
        .map(|x| payoff.value(x).ok_or_else(|| Error::invalid("payoff has no pointwise value")))
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MonteCarloEstimate { mean, std_error: (var / n).sqrt(), paths })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceCell {
    pub price: Option<f64>,
    pub error: Option<String>,
}

impl From<Result<f64>> for PriceCell {
    fn from(r: Result<f64>) -> Self {
        match r {
            Ok(p) => Self { price: Some(p), error: None },
            Err(e) => Self { price: None, error: Some(e.to_string()) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRow {
    pub theta: f64,
    pub cells: Vec<PriceCell>,
}

/// Swap prices for a grid of constant θ (rows) and contracts (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    pub contracts: Vec<String>,
    pub rows: Vec<PriceRow>,
}

/// Cells failing (typically θ at or above the bound) carry their error; the rest are priced.
pub fn price_table(
    model: &PricingModel,
    contracts: &[SwapContract],
    thetas: &[f64],
    seasonality: &(dyn MonthlyLevels + Sync),
    state: &ObservedState,
) -> PriceTable {
    let rows = thetas
        .par_iter()
        .map(|&theta| PriceRow {
            theta,
            cells: contracts
                .iter()
                .map(|c| {
                    EsscherMPR::constant(theta, &model.params)
                        .and_then(|mpr| futures_price(model, &mpr, c, seasonality, state))
                        .into()
                })
                .collect(),
        })
        .collect();
    PriceTable { contracts: contracts.iter().map(|c| c.label.clone()).collect(), rows }
}

/// A market quote on a calendar-month contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractQuote {
    pub month: u32,
    pub year: i32,
    pub market_price: f64,
    pub unit: Unit,
}

impl ContractQuote {
    pub fn contract(&self, valuation: NaiveDateTime) -> Result<SwapContract> {
        SwapContract::monthly(valuation, self.year, self.month, self.unit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub contract: String,
    pub market_price: f64,
    /// Model price at `θ = 0`.
    pub baseline_price: Option<f64>,
    pub theta: Option<f64>,
    pub error: Option<String>,
}

pub fn calibration_table(
    model: &PricingModel,
    quotes: &[(SwapContract, f64)],
    seasonality: &(dyn MonthlyLevels + Sync),
    state: &ObservedState,
) -> Vec<CalibrationRow> {
    quotes
        .par_iter()
        .map(|(contract, market_price)| {
            let baseline = EsscherMPR::constant(0.0, &model.params)
                .and_then(|mpr| futures_price(model, &mpr, contract, seasonality, state));
            let theta = calibrate_theta(model, contract, seasonality, *market_price, state);
            CalibrationRow {
                contract: contract.label.clone(),
                market_price: *market_price,
                baseline_price: baseline.as_ref().ok().copied(),
                error: theta.as_ref().err().or(baseline.as_ref().err()).map(|e| e.to_string()),
                theta: theta.ok(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hougaard::charfn_increment;
    use crate::seasonality::MonthlyTable;
    use chrono::{Duration, NaiveDate};

    fn detroit() -> PricingModel {
        PricingModel::new(
            CarmaSpec::ou(4.54).unwrap(),
            HougaardParams::new(4.55, 14.85, 1.62).unwrap(),
            1.0,
            Unit::Inch,
        )
        .unwrap()
    }

    fn two_component() -> PricingModel {
        PricingModel::new(
            CarmaSpec::new(vec![4.79, 0.31], vec![0.92, 0.08]).unwrap(),
            HougaardParams::new(2.15, 143.01, 1.85).unwrap(),
            1.0 / 24.0,
            Unit::Mm,
        )
        .unwrap()
    }

    fn valuation() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2010, 12, 31).unwrap().and_hms_opt(0, 0, 0).unwrap()
    }

    fn flat() -> MonthlyTable {
        MonthlyTable([1.0; 12])
    }

    #[test]
    fn zero_theta_gives_physical_mean() {
        let m = detroit();
        let c = SwapContract::monthly(valuation(), 2011, 3, Unit::Inch).unwrap();
        let mpr = EsscherMPR::constant(0.0, &m.params).unwrap();
        let price = futures_price(&m, &mpr, &c, &flat(), &ObservedState::MeanApproximation).unwrap();
        let exact = 31.0 * 4.55 / 4.54;
        assert!((price - exact).abs() < 1e-12 * exact, "{price} vs {exact}");
    }

    #[test]
    fn constant_theta_scales_by_derivative_ratio() {
        let m = detroit();
        let k = m.bound();
        let c = SwapContract::monthly(valuation(), 2011, 5, Unit::Inch).unwrap();
        let p0 = futures_price(&m, &EsscherMPR::constant(0.0, &m.params).unwrap(), &c, &flat(), &Default::default()).unwrap();
        let p1 = futures_price(&m, &EsscherMPR::constant(0.01, &m.params).unwrap(), &c, &flat(), &Default::default()).unwrap();
        let ratio = (1.0 - 0.01 / k).powf(-1.0 / 0.62);
        // the mean-approximated state term is untilted but e^{−4.54·120} small
        assert!((p1 / p0 - ratio).abs() < 1e-10);
    }

    #[test]
    fn units_convert() {
        let m = detroit();
        let c = SwapContract::monthly(valuation(), 2011, 3, Unit::Mm).unwrap();
        let mpr = EsscherMPR::constant(0.0, &m.params).unwrap();
        let price = futures_price(&m, &mpr, &c, &flat(), &Default::default()).unwrap();
        assert!((price - 25.4 * 31.0 * 4.55 / 4.54).abs() < 1e-9);
    }

    #[test]
    fn mpr_validation() {
        let p = HougaardParams::new(4.55, 14.85, 1.62).unwrap();
        assert!(matches!(EsscherMPR::constant(0.05, &p), Err(Error::MomentBound { .. })));
        let gap = vec![
            MprPiece { start: 0.0, end: 10.0, theta: 0.0 },
            MprPiece { start: 11.0, end: 100.0, theta: 0.01 },
        ];
        assert!(EsscherMPR::new(gap, &p).is_err());
        let short = EsscherMPR::new(vec![MprPiece { start: 0.0, end: 10.0, theta: 0.0 }], &p).unwrap();
        let c = SwapContract::monthly(valuation(), 2011, 3, Unit::Inch).unwrap();
        assert!(futures_price(&detroit(), &short, &c, &flat(), &Default::default()).is_err());
    }

    #[test]
    fn contract_ordering_enforced() {
        let v = valuation();
        assert!(SwapContract::new(v, v, v + Duration::days(3), "x", Unit::Inch).is_err());
        assert!(SwapContract::monthly(v, 2010, 12, Unit::Inch).is_err());
        assert_eq!(SwapContract::monthly(v, 2011, 3, Unit::Inch).unwrap().label, "Mar 11");
    }

    #[test]
    fn piecewise_theta_splits_integral() {
        let m = detroit();
        let c = SwapContract::monthly(valuation(), 2011, 3, Unit::Inch).unwrap();
        let (d1, d2) = c.window_days();
        let mid = 0.5 * (d1 + d2);
        let mpr = EsscherMPR::new(
            vec![
                MprPiece { start: 0.0, end: mid, theta: 0.0 },
                MprPiece { start: mid, end: d2, theta: 0.02 },
            ],
            &m.params,
        )
        .unwrap();
        let split = futures_price(&m, &mpr, &c, &flat(), &Default::default()).unwrap();
        let lo = futures_price(&m, &EsscherMPR::constant(0.0, &m.params).unwrap(), &c, &flat(), &Default::default()).unwrap();
        let hi = futures_price(&m, &EsscherMPR::constant(0.02, &m.params).unwrap(), &c, &flat(), &Default::default()).unwrap();
        assert!(lo < split && split < hi);
        // roughly the average, as the loading is almost flat inside the window
        assert!((split - 0.5 * (lo + hi)).abs() < 0.01 * split);
    }

    #[test]
    fn fourier_swap_matches_closed_form() {
        for model in [detroit(), two_component()] {
            for frac in [0.0, 0.25, -0.2] {
                let theta = frac * model.bound();
                let c = SwapContract::monthly(valuation(), 2011, 4, model.unit).unwrap();
                let mpr = EsscherMPR::constant(theta, &model.params).unwrap();
                let state = ObservedState::MeanApproximation;
                let direct = futures_price(&model, &mpr, &c, &flat(), &state).unwrap();
                let fourier = riskneutral_expectation(&model, &mpr, &c, &PayoffSpec::new(Payoff::Swap), &state).unwrap();
                assert!(
                    (fourier.value - direct).abs() < 1e-6 * direct,
                    "theta {theta}: {} vs {direct}",
                    fourier.value
                );
            }
        }
    }

    #[test]
    fn charfn_matches_stationary_increment() {
        let m = detroit();
        let start = valuation() + Duration::days(60);
        let c = SwapContract::new(valuation(), start, start + Duration::days(1), "day", Unit::Inch).unwrap();
        let mpr = EsscherMPR::constant(0.0, &m.params).unwrap();
        // with τ₁ − t = 60/λ the state term is e^{−272} and the past is fully integrated
        let state = ObservedState::Components { values: vec![0.0] };
        for u in [0.3, 1.0, 4.0] {
            let a = conditional_charfn(&m, &mpr, &c, &state, u).unwrap();
            let b = charfn_increment(&m.spec, &m.params, 1.0, u).unwrap();
            assert!((a - b).norm() < 1e-8, "u={u}: {a} vs {b}");
        }
    }

    #[test]
    fn damping_outside_hypothesis_is_rejected() {
        let m = detroit();
        let c = SwapContract::monthly(valuation(), 2011, 3, Unit::Inch).unwrap();
        let mpr = EsscherMPR::constant(0.0, &m.params).unwrap();
        let spec = PayoffSpec::new(Payoff::Call { strike: 20.0 }).with_damping(1.0);
        let r = riskneutral_expectation(&m, &mpr, &c, &spec, &Default::default());
        assert!(matches!(r, Err(Error::MomentBound { .. })));
    }

    #[test]
    fn calibration_fixed_point() {
        let m = detroit();
        let c = SwapContract::monthly(valuation(), 2011, 6, Unit::Inch).unwrap();
        let levels = MonthlyTable([0.06; 12]);
        let base = futures_price(&m, &EsscherMPR::constant(0.0, &m.params).unwrap(), &c, &levels, &Default::default()).unwrap();
        let theta = calibrate_theta(&m, &c, &levels, base, &Default::default()).unwrap();
        assert!(theta.abs() < 1e-8, "{theta}");
        let theta = calibrate_theta(&m, &c, &levels, 2.0 * base, &Default::default()).unwrap();
        let k = m.bound();
        let expected = k * (1.0 - 2f64.powf(-0.62));
        assert!((theta - expected).abs() < 1e-9, "{theta} vs {expected}");
        assert!(matches!(
            calibrate_theta(&m, &c, &levels, 1e-30, &Default::default()),
            Err(Error::NotBracketed { .. })
        ));
    }

    #[test]
    fn tilted_zero_matches_physical_stream() {
        let p = HougaardParams::new(4.55, 14.85, 1.62).unwrap();
        let a = tilted_simulation(&p, 0.0, 500.0, 9).unwrap();
        let law = tweedie_to_cpg(&p).unwrap();
        let b = sample_jumps(&law, 0.0, 500.0, &mut stream_rng(9, 0)).unwrap();
        assert_eq!(a, b);
        assert!(tilted_simulation(&p, 0.05, 10.0, 1).is_err());
    }

    #[test]
    fn tilting_identities() {
        // e^{θy} times the Gamma(α, k) density, renormalised, is Gamma(α, k − θ),
        // and the mass ∫e^{θy}ν(dy) equals rate·(k/(k−θ))^α; the tilted moments
        // must then be the derivatives of Φ at θ
        let p = HougaardParams::new(4.55, 14.85, 1.62).unwrap();
        let law = tweedie_to_cpg(&p).unwrap();
        let k = exp_moment_bound(&p);
        let theta = 0.02;
        let t = law.tilted(theta).unwrap();
        assert!((t.rate - law.rate * (k / (k - theta)).powf(law.shape)).abs() < 1e-12 * t.rate);
        assert!((1.0 / t.scale - (k - theta)).abs() < 1e-12 * k);
        let phi = LaplaceExponent::new(&p).unwrap();
        assert!((t.mean() - phi.derivative(theta)).abs() < 1e-10 * t.mean());
        // tilted variance is Φ″(θ)
        let h = 1e-6;
        let second = (phi.derivative(theta + h) - phi.derivative(theta - h)) / (2.0 * h);
        assert!((t.variance() - second).abs() < 1e-6 * second);
    }

    #[test]
    fn reconstruction_recovers_components_from_clean_history() {
        let m = detroit();
        // a history with no rain drains the state towards zero
        let state = ObservedState::Increments { values: vec![0.0; 30], delta: 1.0 };
        let x = state.components(&m).unwrap();
        assert!(x[0] < 1e-50);
        let state = ObservedState::Increments { values: vec![-1.0], delta: 1.0 };
        assert!(state.components(&m).is_err());
    }

    #[test]
    fn advance_components_adds_decayed_jumps() {
        let spec = CarmaSpec::ou(0.5).unwrap();
        let x = advance_components(&spec, &[2.0], &[Jump { time: 1.0, size: 3.0 }], 2.0);
        assert!((x[0] - (2.0 * (-1.0f64).exp() + 3.0 * (-0.5f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn price_table_reports_domain_errors() {
        let m = detroit();
        let cs: Vec<_> = (3..=5).map(|mo| SwapContract::monthly(valuation(), 2011, mo, Unit::Inch).unwrap()).collect();
        let t = price_table(&m, &cs, &[0.0, 0.05], &flat(), &Default::default());
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows[0].cells.iter().all(|c| c.price.is_some()));
        assert!(t.rows[1].cells.iter().all(|c| c.error.is_some()));
    }
}
