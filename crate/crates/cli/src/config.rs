//! JSON run configurations, one per subcommand.
//!
//! Relative paths inside a config are resolved against the directory holding
//! the config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::{NaiveDate, NaiveDateTime};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use rainfall_carma::seasonality::MAX_IDENTIFIABLE_ORDER;
use rainfall_carma::timeseries::{aggregate, CsvFormat, GapPolicy};
use rainfall_carma::{
    load_series, reference, CarmaSpec, HougaardParams, MonthlyTable, ObservedState, PricingModel, RainfallSeries,
    SeasonalityModel, Unit,
};

use crate::Invalid;

pub fn load<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| Invalid(format!("config {}: {e}", path.display())).into())
}

/// Seed from the command line, else from the config; stochastic commands need one.
pub fn seed(flag: Option<u64>, config: Option<u64>) -> anyhow::Result<u64> {
    match flag.or(config) {
        Some(s) => Ok(s),
        None => Err(Invalid("this command is stochastic: give a seed in the config or with --seed".into()).into()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub path: PathBuf,
    pub unit: Unit,
    pub quantum: f64,
    #[serde(default)]
    pub gaps: GapPolicy,
    #[serde(default)]
    pub raw: bool,
    /// Sum this many consecutive observations, e.g. 24 turns hours into days.
    #[serde(default)]
    pub aggregate: Option<usize>,
}

impl DataSource {
    pub fn load(&self, base: &Path) -> anyhow::Result<RainfallSeries> {
        let format = CsvFormat { unit: self.unit, quantum: self.quantum, gaps: self.gaps, raw: self.raw };
        let (series, report) = load_series(base.join(&self.path), &format)?;
        if !report.filled.is_empty() {
            log::warn!("{} missing observations zero-filled", report.filled.len());
        }
        Ok(match self.aggregate {
            Some(k) => aggregate(&series, k)?,
            None => series,
        })
    }
}

/// The parts of a fitted model needed downstream. A `fit` output file
/// deserialises into this, its diagnostics being ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub seasonality: SeasonalityModel,
    pub carma: CarmaSpec,
    pub hougaard: HougaardParams,
    #[serde(default = "one")]
    pub delta: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Detroit,
    Heathrow,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Preset { preset: Preset },
    File(PathBuf),
    Inline(ModelFile),
}

pub struct ResolvedModel {
    pub model: ModelFile,
    pub preset: Option<Preset>,
}

impl ModelSource {
    pub fn resolve(&self, base: &Path) -> anyhow::Result<ResolvedModel> {
        let (model, preset) = match self {
            ModelSource::Preset { preset: p @ Preset::Detroit } => (
                ModelFile {
                    seasonality: reference::detroit_seasonality()?,
                    carma: reference::detroit_spec(),
                    hougaard: reference::detroit_params(),
                    delta: 1.0,
                },
                Some(*p),
            ),
            ModelSource::Preset { preset: p @ Preset::Heathrow } => (
                ModelFile {
                    seasonality: reference::heathrow_seasonality()?,
                    carma: reference::heathrow_spec(),
                    hougaard: reference::heathrow_params(),
                    delta: 1.0,
                },
                Some(*p),
            ),
            ModelSource::File(path) => (load::<ModelFile>(&base.join(path))?, None),
            ModelSource::Inline(m) => (m.clone(), None),
        };
        // re-run the constructor checks skipped by deserialisation
        let s = &model.seasonality;
        SeasonalityModel::new(s.a0, s.a.clone(), s.b.clone())?;
        if !(model.delta > 0.0 && model.delta.is_finite()) {
            bail!(Invalid(format!("model delta must be positive, got {}", model.delta)));
        }
        Ok(ResolvedModel { model, preset })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub data: DataSource,
    pub p: usize,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "max_order")]
    pub max_seasonal_order: usize,
}

fn max_order() -> usize {
    MAX_IDENTIFIABLE_ORDER
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelSource,
    /// First grid time of every path.
    pub start: NaiveDateTime,
    /// Grid step in seconds; one model time unit spans `step_seconds / delta`.
    pub step_seconds: i64,
    pub length: usize,
    pub n_sims: usize,
    pub unit: Unit,
    pub quantum: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub burn_in: Option<f64>,
    /// Also write every simulated path as CSV.
    #[serde(default)]
    pub write_paths: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub data: DataSource,
    pub model: ModelSource,
    pub n_sims: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub max_lag: Option<usize>,
    #[serde(default)]
    pub qq_levels: Option<Vec<f64>>,
}

/// How the monthly seasonal level `S_m` of a contract month is obtained.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelsSource {
    Table([f64; 12]),
    Named(NamedLevels),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedLevels {
    /// Monthly averages of the model seasonality.
    Seasonality,
    /// The reconstructed reference table of the preset.
    Preset,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketSetup {
    pub model: ModelSource,
    /// Days per model time unit. Presets supply their own.
    #[serde(default)]
    pub step_days: Option<f64>,
    /// Model rainfall unit. Presets supply their own.
    #[serde(default)]
    pub unit: Option<Unit>,
    pub valuation: NaiveDate,
    #[serde(default)]
    pub levels: Option<LevelsSource>,
    #[serde(default)]
    pub state: ObservedState,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractMonth {
    pub year: i32,
    pub month: u32,
}

// flattened structs cannot deny unknown fields
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriceConfig {
    #[serde(flatten)]
    pub market: MarketSetup,
    /// Contract unit; defaults to the model unit.
    #[serde(default)]
    pub contract_unit: Option<Unit>,
    pub contracts: Vec<ContractMonth>,
    pub thetas: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrateConfig {
    #[serde(flatten)]
    pub market: MarketSetup,
    pub quotes: Vec<rainfall_carma::pricing::ContractQuote>,
}

pub struct Market {
    pub model: PricingModel,
    pub levels: Box<dyn rainfall_carma::MonthlyLevels + Sync>,
    pub valuation: NaiveDateTime,
    pub state: ObservedState,
}

impl MarketSetup {
    pub fn resolve(&self, base: &Path) -> anyhow::Result<Market> {
        let resolved = self.model.resolve(base)?;
        let (preset_step, preset_unit) = match resolved.preset {
            Some(Preset::Detroit) => (Some(1.0), Some(Unit::Inch)),
            Some(Preset::Heathrow) => (Some(1.0 / 24.0), Some(Unit::Mm)),
            None => (None, None),
        };
        let Some(step_days) = self.step_days.or(preset_step) else {
            bail!(Invalid("step_days is required unless the model is a preset".into()));
        };
        let Some(unit) = self.unit.or(preset_unit) else {
            bail!(Invalid("unit is required unless the model is a preset".into()));
        };
        let m = resolved.model;
        let model = PricingModel::new(m.carma, m.hougaard, step_days, unit)?;
        let default_levels = if resolved.preset.is_some() { NamedLevels::Preset } else { NamedLevels::Seasonality };
        let levels: Box<dyn rainfall_carma::MonthlyLevels + Sync> =
            match self.levels.clone().unwrap_or(LevelsSource::Named(default_levels)) {
                LevelsSource::Table(t) => {
                    if t.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                        bail!(Invalid(format!("monthly levels must be positive, got {t:?}")));
                    }
                    Box::new(MonthlyTable(t))
                }
                LevelsSource::Named(NamedLevels::Seasonality) => Box::new(m.seasonality),
                LevelsSource::Named(NamedLevels::Preset) => match resolved.preset {
                    Some(Preset::Detroit) => Box::new(reference::detroit_monthly_levels()),
                    Some(Preset::Heathrow) => Box::new(reference::heathrow_monthly_levels()),
                    None => bail!(Invalid("preset levels need a preset model".into())),
                },
            };
        let valuation = self.valuation.and_hms_opt(0, 0, 0).expect("midnight exists");
        Ok(Market { model, levels, valuation, state: self.state.clone() })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSearch {
    pub candidates: Vec<f64>,
    pub replications: usize,
    pub length: usize,
    pub replicates: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    pub data: DataSource,
    pub p: usize,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "max_order")]
    pub max_seasonal_order: usize,
    pub replicates: usize,
    /// Mean block length; chosen by simulation from the candidates of
    /// `block_search` when absent.
    #[serde(default)]
    pub mean_block: Option<f64>,
    #[serde(default)]
    pub block_search: Option<BlockSearch>,
    #[serde(default)]
    pub seed: Option<u64>,
}
