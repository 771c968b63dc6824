//! Plain-text tables for people; the JSON and CSV outputs are authoritative.

use std::fmt::Write;

use rainfall_carma::fit::{parameter_names, parameter_vector, BootstrapResult, FittedModel};
use rainfall_carma::pricing::{CalibrationRow, PriceTable};

pub fn fit(model: &FittedModel) -> String {
    let mut s = String::new();
    let p = model.carma.p();
    writeln!(s, "{:<10} {:>12}", "parameter", "estimate").unwrap();
    for (name, value) in parameter_names(p).iter().zip(parameter_vector(&model.carma, &model.hougaard)) {
        writeln!(s, "{name:<10} {value:>12.4}").unwrap();
    }
    writeln!(s).unwrap();
    let season = &model.seasonality;
    writeln!(s, "seasonality order {}: a0 = {:.6}", season.order, season.a0).unwrap();
    for (i, (a, b)) in season.a.iter().zip(&season.b).enumerate() {
        writeln!(s, "  a{} = {a:.6}  b{} = {b:.6}", i + 1, i + 1).unwrap();
    }
    let d = &model.diagnostics;
    writeln!(s, "weighted SSE {:.6e} (initial {:.6e}), {} iterations", d.weighted_sse, d.initial_sse, d.iterations)
        .unwrap();
    if !d.converged {
        writeln!(s, "optimiser stopped before converging").unwrap();
    }
    for w in &d.warnings {
        writeln!(s, "warning: {w}").unwrap();
    }
    s
}

pub fn bootstrap(res: &BootstrapResult) -> String {
    let mut s = String::new();
    writeln!(s, "mean block {}, {} of {} replicates used", res.mean_block, res.requested - res.failed, res.requested)
        .unwrap();
    writeln!(s, "{:<10} {:>12} {:>12} {:>12}", "parameter", "estimate", "2.5%", "97.5%").unwrap();
    for p in &res.parameters {
        writeln!(s, "{:<10} {:>12.4} {:>12.4} {:>12.4}", p.name, p.point, p.lower, p.upper).unwrap();
    }
    s
}

pub fn prices(table: &PriceTable) -> String {
    let mut s = String::new();
    write!(s, "{:>8}", "theta").unwrap();
    for c in &table.contracts {
        write!(s, " {c:>9}").unwrap();
    }
    writeln!(s).unwrap();
    for row in &table.rows {
        write!(s, "{:>8.4}", row.theta).unwrap();
        for cell in &row.cells {
            match cell.price {
                Some(p) => write!(s, " {p:>9.2}").unwrap(),
                None => write!(s, " {:>9}", "-").unwrap(),
            }
        }
        writeln!(s).unwrap();
    }
    s
}

pub fn calibration(rows: &[CalibrationRow]) -> String {
    let mut s = String::new();
    writeln!(s, "{:<9} {:>8} {:>10} {:>10}", "contract", "market", "theta=0", "theta").unwrap();
    for r in rows {
        let fmt = |v: Option<f64>, digits: usize| v.map_or("-".to_string(), |v| format!("{v:.digits$}"));
        writeln!(
            s,
            "{:<9} {:>8.2} {:>10} {:>10}",
            r.contract,
            r.market_price,
            fmt(r.baseline_price, 2),
            fmt(r.theta, 5)
        )
        .unwrap();
    }
    s
}
