//! Exact simulation of the integrated intensity from its compound-Poisson
//! jump representation, and goodness-of-fit diagnostics for simulated rainfall.
//!
//! Jumps arrive on `[−burn_in, T]`; each one adds `J·Σₖ wₖ e^{−λₖ(t−T)}` to the
//! intensity, which is integrated over every grid step in closed form.

use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carma::{acvf_increments, CarmaSpec};
use crate::error::{Error, Result};
use crate::hougaard::{cumulants_increment, tweedie_to_cpg, CompoundPoissonGamma, HougaardParams};
use crate::seasonality::SeasonalityModel;
use crate::stats;
use crate::timeseries::{self, RainfallSeries, Unit};

/// Kernel time constants of burn-in used when none is given.
pub const DEFAULT_BURN_IN_CONSTANTS: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub spec: CarmaSpec,
    pub params: HougaardParams,
    pub length: usize,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to `40 / min λ`.
    #[serde(default)]
    pub burn_in: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl SimulationConfig {
    pub fn new(spec: CarmaSpec, params: HougaardParams, length: usize, seed: u64) -> Self {
        Self { spec, params, length, delta: 1.0, seed, burn_in: None }
    }

    pub fn burn_in(&self) -> f64 {
        self.burn_in
            .unwrap_or(DEFAULT_BURN_IN_CONSTANTS / self.spec.min_lambda())
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::invalid("simulation length must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!("step must be positive, got {}", self.delta)));
        }
        if !(self.burn_in() >= 0.0) {
            return Err(Error::invalid(format!("burn-in must be non-negative, got {}", self.burn_in())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

/// Independent generator for simulation `index` under `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Jumps of a compound Poisson process with Gamma sizes on `[start, end]`, in time order.
pub fn sample_jumps<R: Rng + ?Sized>(law: &CompoundPoissonGamma, start: f64, end: f64, rng: &mut R) -> Result<Vec<Jump>> {
    if law.rate == 0.0 {
        return Ok(Vec::new());
    }
    let gaps = Exp::new(law.rate).map_err(|e| Error::invalid(format!("jump rate {}: {e}", law.rate)))?;
    let sizes = Gamma::new(law.shape, law.scale)
        .map_err(|e| Error::invalid(format!("jump law {law:?}: {e}")))?;
    let mut out = Vec::with_capacity(((end - start) * law.rate * 1.1) as usize + 16);
    let mut t = start;
    loop {
        t += gaps.sample(rng);
        if t > end {
            return Ok(out);
        }
        out.push(Jump { time: t, size: sizes.sample(rng) });
    }
}

/// Increments of `Y` over `[(i−1)δ, iδ]`, `i = 1..=length`, generated exactly by
/// `jumps` (sorted by time; jumps before 0 set the initial state).
pub fn increments_from_jumps(spec: &CarmaSpec, jumps: &[Jump], delta: f64, length: usize) -> Vec<f64> {
    let p = spec.p();
    let lambdas = spec.lambdas();
    let weights = spec.weights();
    let decay: Vec<f64> = lambdas.iter().map(|l| (-l * delta).exp()).collect();
    // ∫₀^δ e^{−λs}ds
    let mass: Vec<f64> = lambdas.iter().map(|l| -(-l * delta).exp_m1() / l).collect();

    // component intensities X_k(0) = Σ_{T<0} J e^{λT}
    let mut state = vec![0.0; p];
    let mut next = 0;
    while next < jumps.len() && jumps[next].time < 0.0 {
        let j = jumps[next];
        for k in 0..p {
            state[k] += j.size * (lambdas[k] * j.time).exp();
        }
        next += 1;
    }

    let mut out = Vec::with_capacity(length);
    for i in 1..=length {
        let right = i as f64 * delta;
        let mut inc = 0.0;
        for k in 0..p {
            inc += weights[k] * state[k] * mass[k];
            state[k] *= decay[k];
        }
        while next < jumps.len() && jumps[next].time <= right {
            let j = jumps[next];
            for k in 0..p {
                let e = (-lambdas[k] * (right - j.time)).exp();
                inc += weights[k] * j.size * (1.0 - e) / lambdas[k];
                state[k] += j.size * e;
            }
            next += 1;
        }
        out.push(inc);
    }
    out
}

/// Simulates `config.length` stationary increments `ΔY` using stream `index`.
pub fn simulate_increments_stream(config: &SimulationConfig, index: u64) -> Result<Vec<f64>> {
    config.validate()?;
    let law = tweedie_to_cpg(&config.params)?;
    let mut rng = stream_rng(config.seed, index);
    let horizon = config.length as f64 * config.delta;
    let jumps = sample_jumps(&law, -config.burn_in(), horizon, &mut rng)?;
    Ok(increments_from_jumps(&config.spec, &jumps, config.delta, config.length))
}

pub fn simulate_increments(config: &SimulationConfig) -> Result<Vec<f64>> {
    simulate_increments_stream(config, 0)
}

/// `ΔRᵢ = S(tᵢ₋₁)·ΔYᵢ` on a grid starting at `start_time`.
pub fn apply_seasonality(
    increments: &[f64],
    model: &SeasonalityModel,
    start_time: NaiveDateTime,
    step: Duration,
    unit: Unit,
    quantum: f64,
) -> Result<RainfallSeries> {
    let mut series = RainfallSeries::new(start_time, step, increments.to_vec(), unit, quantum)?;
    for i in 0..series.len() {
        let s = model.evaluate_positive(series.month_time_at(i))?;
        series.values[i] *= s;
    }
    Ok(series)
}

/// Fraction of values below one measurement quantum, i.e. recorded as zero.
pub fn implied_zero_proportion(series: &RainfallSeries) -> f64 {
    timeseries::zero_proportion(&series.values, series.quantum)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsOptions {
    pub max_lag: usize,
    pub qq_levels: Vec<f64>,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        let mut qq_levels: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        qq_levels.extend([0.995, 0.999]);
        Self { max_lag: 20, qq_levels }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub lower: f64,
    /// `None` for the grouped top bin.
    pub upper: Option<f64>,
    pub empirical: u64,
    /// Count averaged over simulations.
    pub simulated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqRow {
    pub level: f64,
    pub empirical: f64,
    pub simulated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfRow {
    pub lag: usize,
    pub empirical: f64,
    pub simulated: f64,
    pub theoretical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthRow {
    pub month: u32,
    pub empirical: f64,
    pub fitted: f64,
    pub simulated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSummary {
    pub empirical: f64,
    pub simulated_mean: f64,
    pub simulated: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDiagnostics {
    pub n_sims: usize,
    pub frequency: Vec<FrequencyRow>,
    pub qq: Vec<QqRow>,
    pub acf: Vec<AcfRow>,
    pub monthly: Vec<MonthRow>,
    pub zero_proportion: ZeroSummary,
}

/// Simulates `n_sims` rainfall series on the grid of `empirical` (stream `i`
/// for simulation `i`) and compares them with it.
pub fn ensemble_diagnostics(
    n_sims: usize,
    config: &SimulationConfig,
    seasonality: &SeasonalityModel,
    empirical: &RainfallSeries,
    options: &DiagnosticsOptions,
) -> Result<EnsembleDiagnostics> {
    if n_sims == 0 {
        return Err(Error::invalid("need at least one simulation"));
    }
    let cfg = SimulationConfig { length: empirical.len(), ..config.clone() };
    cfg.validate()?;
    let sims: Vec<(Vec<f64>, RainfallSeries)> = (0..n_sims as u64)
        .into_par_iter()
        .map(|i| {
            let dy = simulate_increments_stream(&cfg, i)?;
            let rain = apply_seasonality(
                &dy,
                seasonality,
                empirical.start_time,
                empirical.step(),
                empirical.unit,
                empirical.quantum,
            )?;
            Ok((dy, rain))
        })
        .collect::<Result<_>>()?;

    let frequency = frequency_table(empirical, sims.iter().map(|(_, r)| r.values.as_slice()), n_sims);

    let pooled: Vec<f64> = stats::sorted(&sims.iter().flat_map(|(_, r)| r.values.iter().copied()).collect::<Vec<_>>());
    let emp_sorted = stats::sorted(&empirical.values);
    let qq = options
        .qq_levels
        .iter()
        .map(|&level| QqRow {
            level,
            empirical: stats::quantile_sorted(&emp_sorted, level),
            simulated: stats::quantile_sorted(&pooled, level),
        })
        .collect();

    let deseasonalised = crate::seasonality::deseasonalise(empirical, seasonality)?;
    let emp_acf = normalised_acf(&deseasonalised, options.max_lag);
    let sim_acfs: Vec<Vec<f64>> = sims.iter().map(|(dy, _)| normalised_acf(dy, options.max_lag)).collect();
    let theory = acvf_increments(&cfg.spec, cfg.params.variance(), cfg.delta, options.max_lag)?;
    let acf = (1..=options.max_lag)
        .map(|lag| AcfRow {
            lag,
            empirical: emp_acf.get(lag).copied().unwrap_or(f64::NAN),
            simulated: sim_acfs.iter().map(|a| a.get(lag).copied().unwrap_or(f64::NAN)).sum::<f64>() / n_sims as f64,
            theoretical: theory[lag] / theory[0],
        })
        .collect();

    let mean_dy = cumulants_increment(&cfg.spec, &cfg.params, cfg.delta, 1)?;
    let months = empirical.months();
    let monthly = (1..=12)
        .map(|month| {
            let mut emp = (0.0, 0usize);
            let mut sim = (0.0, 0usize);
            for (i, &m) in months.iter().enumerate() {
                if m == month {
                    emp.0 += empirical.values[i];
                    emp.1 += 1;
                    for (_, rain) in &sims {
                        sim.0 += rain.values[i];
                        sim.1 += 1;
                    }
                }
            }
            Ok(MonthRow {
                month,
                empirical: if emp.1 > 0 { emp.0 / emp.1 as f64 } else { f64::NAN },
                fitted: seasonality.monthly_mean(month)? * mean_dy,
                simulated: if sim.1 > 0 { sim.0 / sim.1 as f64 } else { f64::NAN },
            })
        })
        .collect::<Result<_>>()?;

    let simulated: Vec<f64> = sims.iter().map(|(_, r)| implied_zero_proportion(r)).collect();
    let zero_proportion = ZeroSummary {
        empirical: implied_zero_proportion(empirical),
        simulated_mean: stats::mean(&simulated),
        simulated,
    };

    Ok(EnsembleDiagnostics { n_sims, frequency, qq, acf, monthly, zero_proportion })
}

fn normalised_acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let c = stats::autocovariance(x, max_lag);
    c.iter().map(|v| v / c[0]).collect()
}

const MAX_BINS: usize = 10_000;

/// Bins of width `quantum` from zero; values in the top 1% of the joint range
/// are grouped into one open bin.
fn frequency_table<'a>(
    empirical: &RainfallSeries,
    sims: impl Iterator<Item = &'a [f64]> + Clone,
    n_sims: usize,
) -> Vec<FrequencyRow> {
    let q = empirical.quantum;
    let max = sims
        .clone()
        .flat_map(|s| s.iter().copied())
        .chain(empirical.values.iter().copied())
        .fold(0.0f64, f64::max);
    let cutoff = 0.99 * max;
    let regular = ((cutoff / q).floor() as usize).min(MAX_BINS);
    let top_lower = regular as f64 * q;
    let bin = |v: f64| -> usize { ((v / q + 1e-9).floor() as usize).min(regular) };

    let mut emp = vec![0u64; regular + 1];
    for &v in &empirical.values {
        emp[bin(v)] += 1;
    }
    let mut sim = vec![0u64; regular + 1];
    for s in sims {
        for &v in s {
            sim[bin(v)] += 1;
        }
    }
    (0..=regular)
        .map(|i| FrequencyRow {
            lower: if i == regular { top_lower } else { i as f64 * q },
            upper: if i == regular { None } else { Some((i + 1) as f64 * q) },
            empirical: emp[i],
            simulated: sim[i] as f64 / n_sims as f64,
        })
        .collect()
}

impl EnsembleDiagnostics {
    /// Writes `frequency.csv`, `qq.csv`, `acf.csv`, `monthly.csv` and
    /// `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
        write_rows(&dir.join("frequency.csv"), &self.frequency)?;
        write_rows(&dir.join("qq.csv"), &self.qq)?;
        write_rows(&dir.join("acf.csv"), &self.acf)?;
        write_rows(&dir.join("monthly.csv"), &self.monthly)?;
        let summary = serde_json::json!({
            "n_sims": self.n_sims,
            "zero_proportion": self.zero_proportion,
        });
        let path = dir.join("summary.json");
        std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")
            .map_err(|source| Error::Io { path, source })
    }
}

pub(crate) fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
