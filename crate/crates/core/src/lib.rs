//! Rainfall as an integrated CARMA process driven by a Hougaard (Tweedie
//! compound-Poisson-Gamma) subordinator.
//!
//! Accumulated rainfall over `[tᵢ₋₁, tᵢ]` is `ΔRᵢ = S(tᵢ₋₁)·ΔYᵢ`, where `S` is a
//! positive annual seasonality and `Y` integrates the intensity
//! `X(t) = ∫ Σ wₖ e^{−λₖ(t−s)} dL(s)`. The crate fits the three layers to a
//! gauge series, simulates from the fitted model and prices swaps and options
//! on accumulated rainfall under an Esscher change of measure.
//!
//! ```
//! use rainfall_carma::{reference, pricing::{futures_price, EsscherMPR, ObservedState}};
//!
//! let model = reference::detroit_model();
//! let contract = &reference::detroit_contracts()[0];
//! let mpr = EsscherMPR::constant(0.01, &model.params).unwrap();
//! let price = futures_price(&model, &mpr, contract, &reference::detroit_monthly_levels(), &ObservedState::MeanApproximation).unwrap();
//! assert!((price - 2.61).abs() < 0.02);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calendar;
pub mod carma;
pub mod error;
pub mod fit;
pub mod hougaard;
pub mod optim;
pub mod poly;
pub mod pricing;
pub mod quad;
pub mod reference;
pub mod seasonality;
pub mod simulate;
pub mod stats;
pub mod timeseries;

pub use carma::{carma_to_arma, ArmaSpec, CarmaSpec, ImpliedArma, WeightConstraint};
pub use error::{Error, Result};
pub use fit::{
    bootstrap_cis, calibrate_block_size, fit_carma_params, fit_levy_params, fit_model, BlockCalibration,
    BootstrapResult, CarmaFit, FitOptions, FittedModel,
};
pub use hougaard::{exp_moment_bound, tweedie_to_cpg, CompoundPoissonGamma, HougaardParams};
pub use pricing::{
    calibrate_theta, futures_price, riskneutral_expectation, EsscherMPR, ObservedState, Payoff, PayoffSpec,
    PricingModel, SwapContract,
};
pub use seasonality::{deseasonalise, fit_seasonality, MonthlyLevels, MonthlyTable, SeasonalityModel};
pub use simulate::{simulate_increments, SimulationConfig};
pub use timeseries::{load_series, RainfallSeries, Unit};
