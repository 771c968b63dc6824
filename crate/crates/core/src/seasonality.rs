//! Multiplicative annual seasonality as a truncated Fourier series,
//!
//! ```text
//! S(t) = a0/2 + Σᵢ aᵢ cos(2πit/12) + bᵢ sin(2πit/12)
//! ```
//!
//! with `t` in month-time (see [`crate::calendar`]). The series is fitted by
//! ordinary least squares to the twelve pooled calendar-month means, each
//! placed at its month centre, and the order is picked by Gaussian AIC.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, QuadConfig};
use crate::timeseries::RainfallSeries;

pub const PERIOD_MONTHS: f64 = 12.0;

/// Largest order identifiable from twelve monthly means.
pub const MAX_IDENTIFIABLE_ORDER: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalityModel {
    pub order: usize,
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl SeasonalityModel {
    pub fn new(a0: f64, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::invalid("cosine and sine coefficient counts differ"));
        }
        Ok(Self { order: a.len(), a0, a, b })
    }

    /// `S ≡ level`.
    pub fn constant(level: f64) -> Self {
        Self { order: 0, a0: 2.0 * level, a: Vec::new(), b: Vec::new() }
    }

    pub fn parameter_count(&self) -> usize {
        2 * self.order + 1
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let w = 2.0 * PI * t / PERIOD_MONTHS;
        self.a0 / 2.0
            + self
                .a
                .iter()
                .zip(&self.b)
                .enumerate()
                .map(|(i, (a, b))| {
                    let k = (i + 1) as f64;
                    a * (k * w).cos() + b * (k * w).sin()
                })
                .sum::<f64>()
    }

    /// `S(t)`, failing when it is not strictly positive.
    pub fn evaluate_positive(&self, t: f64) -> Result<f64> {
        let value = self.evaluate(t);
        if value > 0.0 {
            Ok(value)
        } else {
            Err(Error::NonPositiveSeasonality { t, value })
        }
    }

    /// Average of `S` over calendar month `month` (1 = January).
    pub fn monthly_mean(&self, month: u32) -> Result<f64> {
        if !(1..=12).contains(&month) {
            return Err(Error::invalid(format!("month must be in 1..=12, got {month}")));
        }
        let lo = (month - 1) as f64;
        let cfg = QuadConfig::default().with_abs_tol(1e-14);
        let value = quad::integrate(|t| self.evaluate(t), lo, lo + 1.0, &cfg)?.value;
        if value > 0.0 {
            Ok(value)
        } else {
            Err(Error::NonPositiveSeasonality { t: lo + 0.5, value })
        }
    }
}

/// Anything that supplies an average seasonal level per calendar month.
pub trait MonthlyLevels {
    fn monthly_level(&self, month: u32) -> Result<f64>;
}

impl MonthlyLevels for SeasonalityModel {
    fn monthly_level(&self, month: u32) -> Result<f64> {
        self.monthly_mean(month)
    }
}

/// Explicit per-month levels, January first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyTable(pub [f64; 12]);

impl MonthlyLevels for MonthlyTable {
    fn monthly_level(&self, month: u32) -> Result<f64> {
        if !(1..=12).contains(&month) {
            return Err(Error::invalid(format!("month must be in 1..=12, got {month}")));
        }
        let value = self.0[(month - 1) as usize];
        if value > 0.0 {
            Ok(value)
        } else {
            Err(Error::NonPositiveSeasonality { t: month as f64 - 0.5, value })
        }
    }
}

/// Mean value per calendar month, pooled over all years.
pub fn monthly_means(series: &RainfallSeries) -> Result<[f64; 12]> {
    let mut sums = [0.0; 12];
    let mut counts = [0usize; 12];
    for (v, m) in series.values.iter().zip(series.months()) {
        sums[(m - 1) as usize] += v;
        counts[(m - 1) as usize] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 12 {
        return Err(Error::invalid(format!("only {present} distinct calendar months present, need 12")));
    }
    let mut means = [0.0; 12];
    for i in 0..12 {
        means[i] = sums[i] / counts[i] as f64;
    }
    Ok(means)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeasonalityFit {
    pub model: SeasonalityModel,
    /// AIC for each candidate order `0..=max_order`.
    pub aic: Vec<f64>,
}

fn design(order: usize) -> DMatrix<f64> {
    DMatrix::from_fn(12, 2 * order + 1, |row, col| {
        let t = row as f64 + 0.5;
        if col == 0 {
            0.5
        } else {
            let k = col.div_ceil(2) as f64;
            let arg = 2.0 * PI * k * t / PERIOD_MONTHS;
            if col % 2 == 1 {
                arg.cos()
            } else {
                arg.sin()
            }
        }
    })
}

fn least_squares(means: &[f64; 12], order: usize) -> Result<(SeasonalityModel, f64)> {
    let y = DVector::from_column_slice(means);
    let x = design(order);
    if x.ncols() > x.nrows() {
        return Err(Error::SingularDesign { order });
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::SingularDesign { order });
    }
    let coef = svd
        .solve(&y, 1e-14)
        .map_err(|_| Error::SingularDesign { order })?;
    let resid = &y - &x * &coef;
    let model = SeasonalityModel {
        order,
        a0: coef[0],
        a: (0..order).map(|i| coef[1 + 2 * i]).collect(),
        b: (0..order).map(|i| coef[2 + 2 * i]).collect(),
    };
    Ok((model, resid.norm_squared()))
}

/// Least-squares Fourier series of exactly `order` harmonics through twelve monthly means.
pub fn fit_fixed_order(means: &[f64; 12], order: usize) -> Result<SeasonalityModel> {
    Ok(least_squares(means, order)?.0)
}

/// Fits the Fourier series to twelve monthly means, choosing the order in
/// `0..=max_order` with minimal `N·ln(RSS/N) + 2k`.
pub fn fit_to_monthly_means(means: &[f64; 12], max_order: usize) -> Result<SeasonalityFit> {
    let total: f64 = means.iter().map(|v| v * v).sum();
    // exact fits would otherwise give ln(0)
    let rss_floor = 1e-20 * total.max(f64::MIN_POSITIVE);
    let n = 12.0;

    let mut best: Option<(f64, SeasonalityModel)> = None;
    let mut aics = Vec::with_capacity(max_order + 1);
    for order in 0..=max_order {
        let (model, rss) = least_squares(means, order)?;
        let rss = rss.max(rss_floor);
        let k = (2 * order + 1) as f64;
        let aic = n * (rss / n).ln() + 2.0 * k;
        aics.push(aic);
        // strict comparison keeps the smaller order on ties
        if best.as_ref().is_none_or(|(b, _)| aic < *b) {
            best = Some((aic, model));
        }
    }
    let (_, model) = best.expect("at least order 0 is fitted");
    Ok(SeasonalityFit { model, aic: aics })
}

pub fn fit_seasonality(series: &RainfallSeries, max_order: usize) -> Result<SeasonalityFit> {
    let span_days = series.len() as f64 * series.step_days();
    if span_days < 2.0 * 365.0 {
        return Err(Error::invalid(format!(
            "seasonality needs at least two years of data, series spans {span_days:.1} days"
        )));
    }
    let means = monthly_means(series)?;
    fit_to_monthly_means(&means, max_order)
}

/// `ΔR(tᵢ) / S(tᵢ₋₁)`, with `S` evaluated at the left endpoint of each interval.
pub fn deseasonalise(series: &RainfallSeries, model: &SeasonalityModel) -> Result<Vec<f64>> {
    series
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| Ok(v / model.evaluate_positive(series.month_time_at(i))?))
        .collect()
}
