//! Estimation: kernel parameters by weighted one-step prediction error of the
//! implied ARMA, driving-noise parameters by matching three moments, and
//! stationary-bootstrap confidence intervals.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carma::{acvf_increments, carma_to_arma, one_step_prediction_errors, CarmaSpec, MAX_ORDER};
use crate::error::{Error, Result};
use crate::hougaard::{HougaardParams, IncrementLoadings};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::poly::Poly;
use crate::seasonality::{deseasonalise, fit_seasonality, SeasonalityModel};
use crate::simulate::{simulate_increments_stream, stream_rng, SimulationConfig};
use crate::stats;
use crate::timeseries::RainfallSeries;

/// Minimum series length accepted by the fitters.
pub const MIN_FIT_LENGTH: usize = 100;

/// Weights below this are reported as a collapsed component.
pub const COLLAPSED_WEIGHT: f64 = 1e-3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CarmaFitOptions {
    /// Extra optimiser runs from perturbed starting points.
    pub restarts: usize,
    pub optimizer: NelderMeadSettings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NelderMeadSettings {
    pub step: f64,
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_iter: usize,
}

impl From<&NelderMeadSettings> for NelderMeadOptions {
    fn from(s: &NelderMeadSettings) -> Self {
        NelderMeadOptions { step: s.step, f_tol: s.f_tol, x_tol: s.x_tol, max_iter: s.max_iter }
    }
}

impl Default for CarmaFitOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            optimizer: NelderMeadSettings { step: 0.2, f_tol: 1e-10, x_tol: 1e-8, max_iter: 1500 },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CarmaFit {
    pub spec: CarmaSpec,
    /// Weighted one-step prediction SSE at `spec`.
    pub weighted_sse: f64,
    pub initial: CarmaSpec,
    pub initial_sse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(0.0f64, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).chain(std::iter::once((-m).exp())).collect();
    let s: f64 = e.iter().sum();
    let mut w: Vec<f64> = e.iter().map(|v| v / s).collect();
    // keep Σw = 1 to the last bit
    let rest: f64 = w[1..].iter().sum();
    w[0] = 1.0 - rest;
    w
}

fn spec_from_vector(x: &[f64], p: usize) -> Result<CarmaSpec> {
    let lambdas: Vec<f64> = x[..p].iter().map(|v| v.exp()).collect();
    CarmaSpec::new(lambdas, softmax(&x[p..]))
}

fn vector_from_spec(spec: &CarmaSpec) -> Vec<f64> {
    let p = spec.p();
    let w: Vec<f64> = spec.weights().iter().map(|w| w.max(1e-12)).collect();
    let mut x: Vec<f64> = spec.lambdas().iter().map(|l| l.ln()).collect();
    x.extend((0..p - 1).map(|i| (w[i] / w[p - 1]).ln()));
    x
}

/// Weighted one-step prediction SSE of the ARMA implied by `spec`.
pub fn prediction_error_objective(spec: &CarmaSpec, data: &[f64], delta: f64) -> Result<f64> {
    let implied = carma_to_arma(spec, 1.0, delta)?;
    Ok(one_step_prediction_errors(&implied.arma, data)?.weighted_sse)
}

/// Lag-1 autocorrelation of OU increments with `x = λδ`.
fn ou_rho1(x: f64) -> f64 {
    let e = (-x).exp_m1();
    e * e / (2.0 * (e + x))
}

/// Inverts the lag-1 autocorrelation of OU increments, `(1−e^{−x})²/(2(e^{−x}−1+x))`,
/// which falls from 1/2 to 0 as `x = λδ` grows.
fn invert_ou_rho1(rho1: f64, delta: f64) -> f64 {
    let (mut lo, mut hi) = (1e-4f64, 60.0f64);
    if rho1 >= ou_rho1(lo) {
        return lo / delta;
    }
    if rho1 <= ou_rho1(hi) {
        return hi / delta;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if ou_rho1(mid) > rho1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt() / delta
}

fn acf_misfit(spec: &CarmaSpec, target: &[f64], delta: f64) -> f64 {
    let h = target.len() - 1;
    match acvf_increments(spec, 1.0, delta, h) {
        Ok(c) => (1..=h).map(|i| (c[i] / c[0] - target[i] / target[0]).powi(2)).sum(),
        Err(_) => f64::INFINITY,
    }
}

/// Decay rates from the autocovariances at lags `1..=2p`, which follow
/// `C(h) = Σ Aₖ zₖ^{h−1}` with `zₖ = e^{−λₖδ}`.
fn prony_rates(acvf: &[f64], p: usize, delta: f64) -> Option<Vec<f64>> {
    let a = DMatrix::from_fn(p, p, |r, c| acvf[r + p - c]);
    let b = DVector::from_fn(p, |r, _| acvf[r + 1 + p]);
    let coeffs = a.lu().solve(&b)?;
    let mut char_poly: Vec<f64> = (0..p).rev().map(|j| -coeffs[j]).collect();
    char_poly.push(1.0);
    let roots = Poly(char_poly).roots().ok()?;
    let mut rates = Vec::with_capacity(p);
    for r in roots {
        if r.im.abs() > 1e-9 || !(r.re > 0.0 && r.re < 1.0) {
            return None;
        }
        rates.push(-r.re.ln() / delta);
    }
    Some(rates)
}

/// Starting kernel matched to autocovariances `acvf[0..]` (at least `2p + 1` lags).
///
/// For `p = 1` the lag-1 autocorrelation is inverted exactly. For larger `p`
/// the rates come from a Prony fit to lags `1..=2p` and the weights from
/// least squares on the autocorrelations; if that fails, everything is fitted
/// by least squares on the autocorrelations.
pub fn initial_carma_from_acvf(acvf: &[f64], p: usize, delta: f64) -> Result<CarmaSpec> {
    if p == 0 || p > MAX_ORDER {
        return Err(Error::invalid(format!("kernel order must be in 1..={MAX_ORDER}, got {p}")));
    }
    if acvf.len() < 2 * p + 1 {
        return Err(Error::invalid(format!("need {} autocovariance lags, got {}", 2 * p + 1, acvf.len())));
    }
    let lambda1 = invert_ou_rho1(acvf[1] / acvf[0], delta);
    if p == 1 {
        return CarmaSpec::ou(lambda1);
    }
    let fine = NelderMeadOptions { step: 0.5, f_tol: 1e-26, x_tol: 1e-13, max_iter: 5000 };
    let target = &acvf[..=2 * p];

    if let Some(rates) = prony_rates(acvf, p, delta) {
        let lx: Vec<f64> = rates.iter().map(|l| l.ln()).collect();
        let objective = |eta: &[f64]| {
            let mut x = lx.clone();
            x.extend_from_slice(eta);
            spec_from_vector(&x, p).map_or(f64::INFINITY, |s| acf_misfit(&s, target, delta))
        };
        let best = nelder_mead(objective, &vec![0.0; p - 1], &fine);
        let mut x = lx;
        x.extend_from_slice(&best.x);
        if let Ok(spec) = spec_from_vector(&x, p) {
            if best.value.is_finite() {
                return Ok(spec);
            }
        }
    }

    // rates spread around the single-exponential fit
    let wide = &acvf[..acvf.len().min(11)];
    let mut x: Vec<f64> = (0..p).map(|i| (lambda1 * 4f64.powf(p as f64 / 2.0 - 0.5 - i as f64)).ln()).collect();
    x.extend(vec![0.0; p - 1]);
    let best = nelder_mead(
        |x| spec_from_vector(x, p).map_or(f64::INFINITY, |s| acf_misfit(&s, wide, delta)),
        &x,
        &fine,
    );
    spec_from_vector(&best.x, p)
}

/// Fits `{λᵢ, wᵢ}` by minimising the innovations-weighted one-step prediction
/// SSE of the implied ARMA(p, p), over log-rates and softmax weights.
pub fn fit_carma_params(deseasonalised: &[f64], p: usize, delta: f64) -> Result<CarmaFit> {
    fit_carma_params_with(deseasonalised, p, delta, &CarmaFitOptions::default())
}

pub fn fit_carma_params_with(deseasonalised: &[f64], p: usize, delta: f64, options: &CarmaFitOptions) -> Result<CarmaFit> {
    if deseasonalised.len() < MIN_FIT_LENGTH {
        return Err(Error::TooShort { len: deseasonalised.len(), needed: MIN_FIT_LENGTH });
    }
    let acvf = stats::autocovariance(deseasonalised, (2 * p).max(10));
    if !(acvf[0] > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let initial = initial_carma_from_acvf(&acvf, p, delta)?;
    let initial_sse = prediction_error_objective(&initial, deseasonalised, delta)?;

    let objective =
        |x: &[f64]| spec_from_vector(x, p).and_then(|s| prediction_error_objective(&s, deseasonalised, delta)).unwrap_or(f64::INFINITY);
    let nm: NelderMeadOptions = (&options.optimizer).into();
    let x0 = vector_from_spec(&initial);
    let mut best = nelder_mead(objective, &x0, &nm);
    let mut iterations = best.iterations;
    for r in 0..options.restarts {
        // deterministic perturbations alternating in sign across coordinates
        let start: Vec<f64> = x0
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let sign = if (i + r) % 2 == 0 { 1.0 } else { -1.0 };
                v + sign * 0.3 * (r + 1) as f64
            })
            .collect();
        let run = nelder_mead(objective, &start, &nm);
        iterations += run.iterations;
        if run.value < best.value {
            best = run;
        }
    }
    if !best.value.is_finite() {
        return Err(Error::NoConvergence { iterations, best: best.value });
    }
    let (spec, weighted_sse) = if best.value <= initial_sse {
        (spec_from_vector(&best.x, p)?, best.value)
    } else {
        (initial.clone(), initial_sse)
    };

    let mut warnings = Vec::new();
    if let Some((l, w)) = spec.components().find(|(_, w)| *w < COLLAPSED_WEIGHT) {
        let msg = format!(
            "weight {w:.2e} on rate {l:.4} has collapsed; a kernel of order {} describes the data as well",
            p - 1
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    if !best.converged {
        let msg = format!("optimiser hit its iteration cap; best objective {weighted_sse}");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(CarmaFit { spec, weighted_sse, initial, initial_sse, iterations, converged: best.converged, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub mean: f64,
    pub variance: f64,
    /// Third central moment.
    pub third: f64,
}

impl SampleMoments {
    pub fn of(x: &[f64]) -> Self {
        Self {
            mean: stats::mean(x),
            variance: stats::central_moment(x, 2),
            third: stats::central_moment(x, 3),
        }
    }
}

/// Solves the mean, variance and third-cumulant equations of `ΔY` for `(μ, ρ, κ)`.
///
/// With `Iₙ = ∫₀^∞ g₁ⁿ + ∫₀^δ g₂ⁿ` the equations read `m = μI₁`,
/// `v = ρμ^κ I₂` and `c = κρ²μ^{2κ−1} I₃`; the third divided by the square of
/// the second gives `κ = (c/I₃)·μ/(v/I₂)²` in closed form.
pub fn fit_levy_params(deseasonalised: &[f64], spec: &CarmaSpec, delta: f64) -> Result<HougaardParams> {
    if deseasonalised.len() < MIN_FIT_LENGTH {
        return Err(Error::TooShort { len: deseasonalised.len(), needed: MIN_FIT_LENGTH });
    }
    levy_params_from_moments(&SampleMoments::of(deseasonalised), spec, delta)
}

pub fn levy_params_from_moments(m: &SampleMoments, spec: &CarmaSpec, delta: f64) -> Result<HougaardParams> {
    if !(m.mean > 0.0) {
        return Err(Error::invalid(format!("sample mean must be positive, got {}", m.mean)));
    }
    if !(m.variance > 0.0) {
        return Err(Error::ZeroVariance);
    }
    // a Hougaard law is always right-skewed
    if !(m.third > 0.0) {
        return Err(Error::NoMomentSolution(format!(
            "sample skewness must be positive, third central moment is {}",
            m.third
        )));
    }
    let loads = IncrementLoadings::new(spec, delta)?;
    let mu = m.mean / loads.power_integral(1);
    let var_l = m.variance / loads.power_integral(2);
    let third_l = m.third / loads.power_integral(3);
    let kappa = third_l * mu / (var_l * var_l);
    if !(kappa > 1.0 && kappa < 2.0) {
        return Err(Error::NoMomentSolution(format!(
            "moments imply kappa = {kappa:.6} (mu = {mu:.6}, Var L(1) = {var_l:.6}, third cumulant {third_l:.6})"
        )));
    }
    let rho = var_l / mu.powf(kappa);
    HougaardParams::new(mu, rho, kappa)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    pub p: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_seasonal_order")]
    pub max_seasonal_order: usize,
}

fn default_delta() -> f64 {
    1.0
}

fn default_seasonal_order() -> usize {
    crate::seasonality::MAX_IDENTIFIABLE_ORDER
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { p: 1, delta: 1.0, max_seasonal_order: default_seasonal_order() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub weighted_sse: f64,
    pub initial_sse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub sample_moments: SampleMoments,
    pub seasonal_aic: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedModel {
    pub seasonality: SeasonalityModel,
    pub carma: CarmaSpec,
    pub hougaard: HougaardParams,
    pub delta: f64,
    pub diagnostics: FitDiagnostics,
}

/// Seasonality, then kernel, then driving-noise parameters.
pub fn fit_model(series: &RainfallSeries, options: &FitOptions) -> Result<FittedModel> {
    let seasonal = fit_seasonality(series, options.max_seasonal_order)?;
    let y = deseasonalise(series, &seasonal.model)?;
    let carma = fit_carma_params(&y, options.p, options.delta)?;
    let moments = SampleMoments::of(&y);
    let hougaard = levy_params_from_moments(&moments, &carma.spec, options.delta)?;
    Ok(FittedModel {
        seasonality: seasonal.model,
        carma: carma.spec,
        hougaard,
        delta: options.delta,
        diagnostics: FitDiagnostics {
            weighted_sse: carma.weighted_sse,
            initial_sse: carma.initial_sse,
            iterations: carma.iterations,
            converged: carma.converged,
            sample_moments: moments,
            seasonal_aic: seasonal.aic,
            warnings: carma.warnings,
        },
    })
}

/// One stationary-bootstrap resample: each position starts a new block at a
/// uniform index with probability `1/mean_block`, else continues the current
/// block, wrapping around the end.
pub fn stationary_resample<R: rand::Rng + ?Sized>(series: &[f64], mean_block: f64, rng: &mut R) -> Vec<f64> {
    let n = series.len();
    let restart = 1.0 / mean_block;
    let mut out = Vec::with_capacity(n);
    let mut idx = rng.random_range(0..n);
    out.push(series[idx]);
    for _ in 1..n {
        if rng.random::<f64>() < restart {
            idx = rng.random_range(0..n);
        } else {
            idx = (idx + 1) % n;
        }
        out.push(series[idx]);
    }
    out
}

fn check_bootstrap_args(series: &[f64], mean_block: f64, replicates: usize) -> Result<()> {
    if series.is_empty() {
        return Err(Error::invalid("cannot resample an empty series"));
    }
    if !(mean_block >= 1.0) {
        return Err(Error::invalid(format!("mean block length must be at least 1, got {mean_block}")));
    }
    if replicates == 0 {
        return Err(Error::invalid("need at least one bootstrap replicate"));
    }
    Ok(())
}

/// `replicates` stationary-bootstrap resamples; replicate `r` uses stream `r` of `seed`.
pub fn stationary_bootstrap(series: &[f64], mean_block: f64, replicates: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_bootstrap_args(series, mean_block, replicates)?;
    Ok((0..replicates as u64)
        .into_par_iter()
        .map(|r| stationary_resample(series, mean_block, &mut stream_rng(seed, r)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterInterval {
    pub name: String,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub replicates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub mean_block: f64,
    pub requested: usize,
    pub failed: usize,
    pub parameters: Vec<ParameterInterval>,
}

impl BootstrapResult {
    pub fn get(&self, name: &str) -> Option<&ParameterInterval> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

/// Parameter names in the order used by [`parameter_vector`].
pub fn parameter_names(p: usize) -> Vec<String> {
    let mut names: Vec<String> = (1..=p).map(|i| format!("lambda_{i}")).collect();
    names.extend((1..=p).map(|i| format!("w_{i}")));
    names.extend(["mu", "rho", "kappa"].map(String::from));
    names
}

pub fn parameter_vector(spec: &CarmaSpec, params: &HougaardParams) -> Vec<f64> {
    let mut v = spec.lambdas().to_vec();
    v.extend_from_slice(spec.weights());
    v.extend([params.mu, params.rho, params.kappa]);
    v
}

fn fit_pair(y: &[f64], p: usize, delta: f64) -> Result<(CarmaSpec, HougaardParams)> {
    let spec = fit_carma_params(y, p, delta)?.spec;
    let params = fit_levy_params(y, &spec, delta)?;
    Ok((spec, params))
}

/// Percentile (2.5%, 97.5%) intervals from replicate estimates, one vector per
/// replicate in [`parameter_vector`] order.
pub fn summarize_replicates(
    names: &[String],
    point: &[f64],
    replicates: &[Vec<f64>],
    mean_block: f64,
    requested: usize,
) -> BootstrapResult {
    let parameters = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let values: Vec<f64> = replicates.iter().map(|r| r[j]).collect();
            let sorted = stats::sorted(&values);
            ParameterInterval {
                name: name.clone(),
                point: point[j],
                lower: stats::quantile_sorted(&sorted, 0.025),
                upper: stats::quantile_sorted(&sorted, 0.975),
                replicates: values,
            }
        })
        .collect();
    BootstrapResult { mean_block, requested, failed: requested - replicates.len(), parameters }
}

/// Refits kernel and driving-noise parameters on stationary-bootstrap
/// resamples of the deseasonalised series. Failed replicate fits are dropped
/// unless more than 10% fail.
pub fn bootstrap_cis(
    series: &[f64],
    p: usize,
    delta: f64,
    mean_block: f64,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    check_bootstrap_args(series, mean_block, replicates)?;
    let (spec, params) = fit_pair(series, p, delta)?;
    let point = parameter_vector(&spec, &params);
    let fits: Vec<Option<Vec<f64>>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let resample = stationary_resample(series, mean_block, &mut stream_rng(seed, r));
            match fit_pair(&resample, p, delta) {
                Ok((s, h)) => Some(parameter_vector(&s, &h)),
                Err(e) => {
                    log::info!("bootstrap replicate {r} dropped: {e}");
                    None
                }
            }
        })
        .collect();
    let ok: Vec<Vec<f64>> = fits.into_iter().flatten().collect();
    let failed = replicates - ok.len();
    if failed * 10 > replicates {
        return Err(Error::BootstrapFailures { failed, total: replicates });
    }
    Ok(summarize_replicates(&parameter_names(p), &point, &ok, mean_block, replicates))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockCalibration {
    pub candidates: Vec<f64>,
    /// Simulated data sets per candidate.
    pub replications: usize,
    /// Length of each simulated data set.
    pub length: usize,
    /// Bootstrap replicates per interval.
    pub replicates: usize,
    pub seed: u64,
}

impl Default for BlockCalibration {
    fn default() -> Self {
        Self {
            candidates: vec![5.0, 10.0, 20.0, 50.0, 100.0, 200.0],
            replications: 50,
            length: 11_000,
            replicates: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateCoverage {
    pub mean_block: f64,
    /// Share of intervals covering the true value, averaged over free parameters.
    pub coverage: f64,
    /// Per parameter, in [`parameter_names`] order.
    pub per_parameter: Vec<f64>,
    pub failed_replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCalibrationResult {
    pub chosen: f64,
    pub names: Vec<String>,
    pub candidates: Vec<CandidateCoverage>,
}

/// Simulates data sets from `model`, builds bootstrap intervals with each
/// candidate mean block length and picks the candidate whose coverage of the
/// true parameters is closest to 95% (ties go to the smaller block).
pub fn calibrate_block_size(
    spec: &CarmaSpec,
    params: &HougaardParams,
    delta: f64,
    config: &BlockCalibration,
) -> Result<BlockCalibrationResult> {
    if config.candidates.is_empty() {
        return Err(Error::invalid("no candidate block lengths"));
    }
    if config.replications == 0 {
        return Err(Error::invalid("need at least one replication"));
    }
    let p = spec.p();
    let truth = parameter_vector(spec, params);
    // with p = 1 the single weight is fixed at one
    let free: Vec<usize> = (0..truth.len()).filter(|&j| !(p == 1 && j == 1)).collect();
    let sim = SimulationConfig { delta, ..SimulationConfig::new(spec.clone(), *params, config.length, config.seed) };
    let data: Vec<Vec<f64>> = (0..config.replications as u64)
        .map(|j| simulate_increments_stream(&sim, j))
        .collect::<Result<_>>()?;

    let mut candidates = Vec::with_capacity(config.candidates.len());
    for &block in &config.candidates {
        let mut hits = vec![0usize; truth.len()];
        let mut done = 0usize;
        let mut failed = 0usize;
        for (j, y) in data.iter().enumerate() {
            match bootstrap_cis(y, p, delta, block, config.replicates, config.seed ^ ((j as u64) << 32)) {
                Ok(res) => {
                    done += 1;
                    for (k, ci) in res.parameters.iter().enumerate() {
                        if ci.lower <= truth[k] && truth[k] <= ci.upper {
                            hits[k] += 1;
                        }
                    }
                }
                Err(e) => {
                    log::warn!("block {block}, replication {j}: {e}");
                    failed += 1;
                }
            }
        }
        if done == 0 {
            return Err(Error::BootstrapFailures { failed, total: config.replications });
        }
        let per_parameter: Vec<f64> = hits.iter().map(|&h| h as f64 / done as f64).collect();
        let coverage = free.iter().map(|&k| per_parameter[k]).sum::<f64>() / free.len() as f64;
        candidates.push(CandidateCoverage { mean_block: block, coverage, per_parameter, failed_replications: failed });
    }
    let chosen = candidates
        .iter()
        .min_by(|a, b| {
            (a.coverage - 0.95)
                .abs()
                .total_cmp(&(b.coverage - 0.95).abs())
                .then(a.mean_block.total_cmp(&b.mean_block))
        })
        .map(|c| c.mean_block)
        .expect("candidates non-empty");
    Ok(BlockCalibrationResult { chosen, names: parameter_names(p), candidates })
}
