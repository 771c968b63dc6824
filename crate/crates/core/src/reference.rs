//! Published parameter sets for two gauges and the Detroit 2011 futures
//! illustration, used by examples, benchmarks and reproduction tests.
//!
//! Seasonal levels are not published alongside the parameters and are
//! reconstructed here. For Detroit the March–October levels are backed out of
//! the `θ = 0` futures prices (`S_m = price / (days·μ/λ)`); the remaining months
//! scale 1981–2010 climate normals by the average price-to-normal ratio of the
//! backed-out months. Heathrow uses its 1981–2010 monthly normals directly.

use chrono::{NaiveDate, NaiveDateTime};

use crate::calendar::days_in_month;
use crate::carma::CarmaSpec;
use crate::error::Result;
use crate::hougaard::HougaardParams;
use crate::pricing::{PricingModel, SwapContract};
use crate::seasonality::{fit_fixed_order, MonthlyTable, SeasonalityModel};
use crate::timeseries::Unit;

/// Daily Detroit fit, in inches and days.
pub const DETROIT_LAMBDA: f64 = 4.54;
pub const DETROIT_HOUGAARD: (f64, f64, f64) = (4.55, 14.85, 1.62);
/// Bootstrap interval for λ.
pub const DETROIT_LAMBDA_CI: (f64, f64) = (4.06, 5.25);
pub const DETROIT_QUANTUM_IN: f64 = 0.03;
pub const DETROIT_YEARS: (i32, i32) = (1980, 2010);
/// Observed percentage of zero days.
pub const DETROIT_ZERO_PERCENT: f64 = 48.14;
/// Implied zero percentage reported for simulations of the fitted model.
pub const DETROIT_SIMULATED_ZERO_PERCENT: f64 = 59.52;

/// Hourly Heathrow fit, in millimetres and hours.
pub const HEATHROW_LAMBDAS: [f64; 2] = [4.79, 0.31];
pub const HEATHROW_WEIGHTS: [f64; 2] = [0.92, 0.08];
pub const HEATHROW_HOUGAARD: (f64, f64, f64) = (2.15, 143.01, 1.85);
pub const HEATHROW_QUANTUM_MM: f64 = 0.1;
pub const HEATHROW_YEARS: (i32, i32) = (1980, 2012);
pub const HEATHROW_ZERO_PERCENT: f64 = 91.27;
pub const HEATHROW_SIMULATED_ZERO_PERCENT: f64 = 90.39;

/// Months of the 2011 Detroit contracts.
pub const CONTRACT_MONTHS: [u32; 8] = [3, 4, 5, 6, 7, 8, 9, 10];
pub const CONTRACT_YEAR: i32 = 2011;

/// Exchange settlement quotes for the contracts, in inches.
pub const CME_PRICES: [f64; 8] = [4.2, 4.4, 3.2, 5.0, 4.5, 4.3, 4.2, 4.6];

/// Constant market prices of risk of the published price grid.
pub const PRICE_GRID_THETAS: [f64; 6] = [-0.01, 0.0, 0.01, 0.02, 0.03, 0.04];

/// Published model prices, one row per entry of [`PRICE_GRID_THETAS`].
pub const PRICE_GRID: [[f64; 8]; 6] = [
    [1.20, 1.50, 1.83, 1.85, 1.83, 1.70, 1.58, 1.59],
    [1.69, 2.10, 2.57, 2.60, 2.57, 2.39, 2.22, 2.24],
    [2.61, 3.24, 3.96, 4.01, 3.96, 3.69, 3.43, 3.45],
    [4.72, 5.86, 7.15, 7.25, 7.16, 6.67, 6.19, 6.23],
    [12.12, 15.04, 18.38, 18.63, 18.39, 17.12, 15.91, 16.01],
    [153.69, 190.80, 233.11, 236.27, 233.21, 217.19, 201.83, 203.13],
];

/// Published θ calibrated to [`CME_PRICES`].
pub const CALIBRATED_THETAS: [f64; 8] = [0.0183, 0.0156, 0.0054, 0.0142, 0.0125, 0.0130, 0.01314, 0.0142];

/// Detroit Metropolitan Airport monthly precipitation normals 1981–2010, inches.
pub const DETROIT_NORMALS_IN: [f64; 12] = [2.03, 2.02, 2.28, 2.91, 3.38, 3.52, 3.37, 3.00, 3.27, 2.52, 2.79, 2.46];

/// Heathrow monthly precipitation normals 1981–2010, millimetres.
pub const HEATHROW_NORMALS_MM: [f64; 12] = [55.2, 40.9, 41.6, 43.7, 49.4, 45.1, 44.5, 49.5, 49.1, 68.5, 59.0, 55.2];

pub fn detroit_spec() -> CarmaSpec {
    CarmaSpec::ou(DETROIT_LAMBDA).expect("valid rate")
}

pub fn detroit_params() -> HougaardParams {
    let (mu, rho, kappa) = DETROIT_HOUGAARD;
    HougaardParams::new(mu, rho, kappa).expect("valid parameters")
}

pub fn detroit_model() -> PricingModel {
    PricingModel::new(detroit_spec(), detroit_params(), 1.0, Unit::Inch).expect("valid model")
}

pub fn heathrow_spec() -> CarmaSpec {
    CarmaSpec::new(HEATHROW_LAMBDAS.to_vec(), HEATHROW_WEIGHTS.to_vec()).expect("valid spectral parameters")
}

pub fn heathrow_params() -> HougaardParams {
    let (mu, rho, kappa) = HEATHROW_HOUGAARD;
    HougaardParams::new(mu, rho, kappa).expect("valid parameters")
}

pub fn heathrow_model() -> PricingModel {
    PricingModel::new(heathrow_spec(), heathrow_params(), 1.0 / 24.0, Unit::Mm).expect("valid model")
}

/// `E ΔY` per model time unit, `μ·Σ wₖ/λₖ`.
fn unit_mean(spec: &CarmaSpec, params: &HougaardParams) -> f64 {
    params.mu * spec.kernel_mass()
}

/// End of 2010, when the 2011 contracts are valued.
pub fn valuation_time() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2010, 12, 31)
        .expect("valid date")
        .and_hms_opt(0, 0, 0)
        .expect("valid time")
}

pub fn detroit_contracts() -> Vec<SwapContract> {
    CONTRACT_MONTHS
        .iter()
        .map(|&m| SwapContract::monthly(valuation_time(), CONTRACT_YEAR, m, Unit::Inch).expect("valid contract"))
        .collect()
}

/// Detroit seasonal levels per month, exact on the contract months.
pub fn detroit_monthly_levels() -> MonthlyTable {
    let per_day = unit_mean(&detroit_spec(), &detroit_params());
    let baseline = &PRICE_GRID[1];
    let mut levels = [0.0; 12];
    let mut ratio = 0.0;
    for (i, &m) in CONTRACT_MONTHS.iter().enumerate() {
        let days = days_in_month(CONTRACT_YEAR, m) as f64;
        levels[(m - 1) as usize] = baseline[i] / (days * per_day);
        ratio += baseline[i] / DETROIT_NORMALS_IN[(m - 1) as usize];
    }
    ratio /= CONTRACT_MONTHS.len() as f64;
    for m in 1..=12u32 {
        if !CONTRACT_MONTHS.contains(&m) {
            let days = days_in_month(CONTRACT_YEAR, m) as f64;
            levels[(m - 1) as usize] = ratio * DETROIT_NORMALS_IN[(m - 1) as usize] / (days * per_day);
        }
    }
    MonthlyTable(levels)
}

/// Second-order Fourier seasonality through [`detroit_monthly_levels`].
pub fn detroit_seasonality() -> Result<SeasonalityModel> {
    fit_fixed_order(&detroit_monthly_levels().0, 2)
}

/// Heathrow seasonal levels per month from the climate normals.
pub fn heathrow_monthly_levels() -> MonthlyTable {
    let per_hour = unit_mean(&heathrow_spec(), &heathrow_params());
    let mut levels = [0.0; 12];
    for m in 1..=12u32 {
        // average month length over the leap cycle keeps February honest
        let hours = if m == 2 { 28.25 * 24.0 } else { days_in_month(2011, m) as f64 * 24.0 };
        levels[(m - 1) as usize] = HEATHROW_NORMALS_MM[(m - 1) as usize] / (hours * per_hour);
    }
    MonthlyTable(levels)
}

pub fn heathrow_seasonality() -> Result<SeasonalityModel> {
    fit_fixed_order(&heathrow_monthly_levels().0, 2)
}
