use std::path::Path;

use anyhow::{bail, Context as _};
use chrono::Duration;
use rayon::prelude::*;
use serde::Serialize;

use rainfall_carma::fit::{fit_levy_params, BlockCalibration};
use rainfall_carma::pricing::{calibration_table, price_table, SwapContract};
use rainfall_carma::simulate::{
    apply_seasonality, ensemble_diagnostics, implied_zero_proportion, simulate_increments_stream, DiagnosticsOptions,
};
use rainfall_carma::{
    bootstrap_cis, calibrate_block_size, deseasonalise, fit_carma_params, fit_model, fit_seasonality, FitOptions,
    SimulationConfig,
};

use crate::config::{BootstrapConfig, CalibrateConfig, DiagnoseConfig, FitConfig, PriceConfig, SimulateConfig};
use crate::{report, Context, Invalid};

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn check_order(p: usize) -> anyhow::Result<()> {
    if p == 0 {
        bail!(Invalid("the kernel order p must be at least 1".into()));
    }
    Ok(())
}

pub fn fit(cfg: &FitConfig, ctx: &Context) -> anyhow::Result<()> {
    check_order(cfg.p)?;
    let series = cfg.data.load(&ctx.base)?;
    log::info!("fitting p = {} to {} observations", cfg.p, series.len());
    let options = FitOptions { p: cfg.p, delta: cfg.delta, max_seasonal_order: cfg.max_seasonal_order };
    let model = fit_model(&series, &options)?;
    write_json(&ctx.out.join("model.json"), &model)?;
    let text = report::fit(&model);
    write_text(&ctx.out.join("report.txt"), &text)?;
    eprint!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct ZeroReport {
    n_sims: usize,
    quantum: f64,
    /// Percentage of observations below one quantum, per simulation.
    zero_percent: Vec<f64>,
    mean_zero_percent: f64,
}

pub fn simulate(cfg: &SimulateConfig, ctx: &Context) -> anyhow::Result<()> {
    let seed = crate::config::seed(ctx.seed, cfg.seed)?;
    if cfg.n_sims == 0 {
        bail!(Invalid("n_sims must be at least 1".into()));
    }
    if cfg.step_seconds <= 0 {
        bail!(Invalid(format!("step_seconds must be positive, got {}", cfg.step_seconds)));
    }
    let model = cfg.model.resolve(&ctx.base)?.model;
    let sim = SimulationConfig {
        delta: model.delta,
        burn_in: cfg.burn_in,
        ..SimulationConfig::new(model.carma, model.hougaard, cfg.length, seed)
    };
    sim.validate()?;
    let step = Duration::seconds(cfg.step_seconds);
    log::info!("simulating {} paths of length {}", cfg.n_sims, cfg.length);
    let paths = (0..cfg.n_sims as u64)
        .into_par_iter()
        .map(|i| {
            let dy = simulate_increments_stream(&sim, i)?;
            apply_seasonality(&dy, &model.seasonality, cfg.start, step, cfg.unit, cfg.quantum)
        })
        .collect::<rainfall_carma::Result<Vec<_>>>()?;

    let zero_percent: Vec<f64> = paths.iter().map(|p| 100.0 * implied_zero_proportion(p)).collect();
    let mean_zero_percent = zero_percent.iter().sum::<f64>() / zero_percent.len() as f64;
    write_csv(
        &ctx.out.join("zero_proportion.csv"),
        &["simulation", "zero_percent"],
        zero_percent.iter().enumerate().map(|(i, z)| [i.to_string(), z.to_string()]),
    )?;
    write_json(
        &ctx.out.join("summary.json"),
        &ZeroReport { n_sims: cfg.n_sims, quantum: cfg.quantum, zero_percent: zero_percent.clone(), mean_zero_percent },
    )?;
    if cfg.write_paths {
        let dir = ctx.out.join("paths");
        std::fs::create_dir_all(&dir)?;
        for (i, p) in paths.iter().enumerate() {
            write_csv(
                &dir.join(format!("sim_{i:04}.csv")),
                &["timestamp", "value"],
                p.values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| [p.time_at(j).format("%Y-%m-%dT%H:%M:%S").to_string(), v.to_string()]),
            )?;
        }
    }
    eprintln!("simulated zero percentage {mean_zero_percent:.2} over {} paths", cfg.n_sims);
    Ok(())
}

pub fn diagnose(cfg: &DiagnoseConfig, ctx: &Context) -> anyhow::Result<()> {
    let seed = crate::config::seed(ctx.seed, cfg.seed)?;
    let data = cfg.data.load(&ctx.base)?;
    let model = cfg.model.resolve(&ctx.base)?.model;
    let mut options = DiagnosticsOptions::default();
    if let Some(lag) = cfg.max_lag {
        options.max_lag = lag;
    }
    if let Some(levels) = &cfg.qq_levels {
        if levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
            bail!(Invalid(format!("quantile levels must lie in [0, 1], got {levels:?}")));
        }
        options.qq_levels = levels.clone();
    }
    let sim = SimulationConfig { delta: model.delta, ..SimulationConfig::new(model.carma, model.hougaard, data.len(), seed) };
    log::info!("comparing {} observations with {} simulations", data.len(), cfg.n_sims);
    let diagnostics = ensemble_diagnostics(cfg.n_sims, &sim, &model.seasonality, &data, &options)?;
    diagnostics.write(ctx.out)?;
    let z = &diagnostics.zero_proportion;
    eprintln!(
        "zero percentage: data {:.2}, simulated {:.2}",
        100.0 * z.empirical,
        100.0 * z.simulated_mean
    );
    Ok(())
}

pub fn price(cfg: &PriceConfig, ctx: &Context) -> anyhow::Result<()> {
    if cfg.contracts.is_empty() || cfg.thetas.is_empty() {
        bail!(Invalid("need at least one contract and one theta".into()));
    }
    let market = cfg.market.resolve(&ctx.base)?;
    let unit = cfg.contract_unit.unwrap_or(market.model.unit);
    let contracts = cfg
        .contracts
        .iter()
        .map(|c| SwapContract::monthly(market.valuation, c.year, c.month, unit))
        .collect::<rainfall_carma::Result<Vec<_>>>()?;
    let table = price_table(&market.model, &contracts, &cfg.thetas, market.levels.as_ref(), &market.state);
    write_json(&ctx.out.join("prices.json"), &table)?;

    let mut header = vec!["theta"];
    header.extend(table.contracts.iter().map(String::as_str));
    write_csv(
        &ctx.out.join("prices.csv"),
        &header,
        table.rows.iter().map(|r| {
            std::iter::once(r.theta.to_string())
                .chain(r.cells.iter().map(|c| c.price.map_or(String::new(), |p| p.to_string())))
                .collect::<Vec<_>>()
        }),
    )?;
    let errors: Vec<[String; 3]> = table
        .rows
        .iter()
        .flat_map(|r| {
            r.cells.iter().zip(&table.contracts).filter_map(move |(c, label)| {
                c.error.as_ref().map(|e| [r.theta.to_string(), label.clone(), e.clone()])
            })
        })
        .collect();
    for e in &errors {
        log::warn!("theta {} / {}: {}", e[0], e[1], e[2]);
    }
    write_csv(&ctx.out.join("price_errors.csv"), &["theta", "contract", "error"], errors)?;
    eprint!("{}", report::prices(&table));
    Ok(())
}

pub fn calibrate(cfg: &CalibrateConfig, ctx: &Context) -> anyhow::Result<()> {
    if cfg.quotes.is_empty() {
        bail!(Invalid("need at least one quote".into()));
    }
    let market = cfg.market.resolve(&ctx.base)?;
    let quotes = cfg
        .quotes
        .iter()
        .map(|q| Ok((q.contract(market.valuation)?, q.market_price)))
        .collect::<rainfall_carma::Result<Vec<_>>>()?;
    let rows = calibration_table(&market.model, &quotes, market.levels.as_ref(), &market.state);
    write_json(&ctx.out.join("calibration.json"), &rows)?;
    write_csv(
        &ctx.out.join("calibration.csv"),
        &["contract", "market_price", "baseline_price", "theta", "error"],
        rows.iter().map(|r| {
            [
                r.contract.clone(),
                r.market_price.to_string(),
                r.baseline_price.map_or(String::new(), |v| v.to_string()),
                r.theta.map_or(String::new(), |v| v.to_string()),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )?;
    eprint!("{}", report::calibration(&rows));
    Ok(())
}

pub fn bootstrap(cfg: &BootstrapConfig, ctx: &Context) -> anyhow::Result<()> {
    check_order(cfg.p)?;
    let seed = crate::config::seed(ctx.seed, cfg.seed)?;
    let series = cfg.data.load(&ctx.base)?;
    let seasonal = fit_seasonality(&series, cfg.max_seasonal_order)?;
    let y = deseasonalise(&series, &seasonal.model)?;

    let mean_block = match (cfg.mean_block, &cfg.block_search) {
        (Some(b), _) => b,
        (None, Some(search)) => {
            let spec = fit_carma_params(&y, cfg.p, cfg.delta)?.spec;
            let params = fit_levy_params(&y, &spec, cfg.delta)?;
            let calibration = BlockCalibration {
                candidates: search.candidates.clone(),
                replications: search.replications,
                length: search.length,
                replicates: search.replicates,
                seed,
            };
            log::info!("choosing the block length among {:?}", search.candidates);
            let result = calibrate_block_size(&spec, &params, cfg.delta, &calibration)?;
            write_json(&ctx.out.join("block_search.json"), &result)?;
            result.chosen
        }
        (None, None) => bail!(Invalid("give mean_block or block_search".into())),
    };
    log::info!("{} bootstrap replicates with mean block {mean_block}", cfg.replicates);
    let result = bootstrap_cis(&y, cfg.p, cfg.delta, mean_block, cfg.replicates, seed)?;
    write_json(&ctx.out.join("bootstrap.json"), &result)?;
    write_csv(
        &ctx.out.join("bootstrap.csv"),
        &["parameter", "estimate", "lower", "upper"],
        result
            .parameters
            .iter()
            .map(|p| [p.name.clone(), p.point.to_string(), p.lower.to_string(), p.upper.to_string()]),
    )?;
    eprint!("{}", report::bootstrap(&result));
    Ok(())
}
