//! Uniformly spaced accumulated-rainfall series: loading, aggregation and
//! summary statistics.
//!
//! Each value is the rainfall accumulated over `[tᵢ, tᵢ + step)`, where `tᵢ`
//! is the row timestamp. Downstream code treats `tᵢ` as the left endpoint of
//! the increment interval.

use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::calendar;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Mm,
    Inch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RainfallSeries {
    pub start_time: NaiveDateTime,
    pub step_seconds: i64,
    pub values: Vec<f64>,
    pub unit: Unit,
    /// Measurement rounding unit, in `unit`.
    pub quantum: f64,
}

impl RainfallSeries {
    pub fn new(
        start_time: NaiveDateTime,
        step: Duration,
        values: Vec<f64>,
        unit: Unit,
        quantum: f64,
    ) -> Result<Self> {
        if step <= Duration::zero() {
            return Err(Error::invalid("time step must be positive"));
        }
        if !(quantum > 0.0) {
            return Err(Error::invalid(format!("quantum must be positive, got {quantum}")));
        }
        if let Some((row, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeValue { row, value });
        }
        Ok(Self {
            start_time,
            step_seconds: step.num_seconds(),
            values,
            unit,
            quantum,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> Duration {
        Duration::seconds(self.step_seconds)
    }

    pub fn step_days(&self) -> f64 {
        self.step_seconds as f64 / 86_400.0
    }

    /// Left endpoint of the `i`-th accumulation interval.
    pub fn time_at(&self, i: usize) -> NaiveDateTime {
        self.start_time + Duration::seconds(self.step_seconds * i as i64)
    }

    pub fn month_time_at(&self, i: usize) -> f64 {
        calendar::month_time(self.time_at(i))
    }

    /// Calendar month (1..=12) of each observation.
    pub fn months(&self) -> Vec<u32> {
        use chrono::Datelike;
        (0..self.len()).map(|i| self.time_at(i).month()).collect()
    }

    /// True when every value is an integer multiple of the quantum.
    pub fn is_quantized(&self) -> bool {
        self.values.iter().all(|&v| is_multiple(v, self.quantum))
    }
}

fn is_multiple(v: f64, quantum: f64) -> bool {
    let k = v / quantum;
    (k - k.round()).abs() <= 1e-6 * k.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    /// Missing grid points are an error.
    #[default]
    Reject,
    /// Missing grid points are filled with zero rainfall and logged.
    ZeroFill,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvFormat {
    pub unit: Unit,
    pub quantum: f64,
    #[serde(default)]
    pub gaps: GapPolicy,
    /// Require every value to be a multiple of `quantum`.
    #[serde(default)]
    pub raw: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LoadReport {
    /// Indices (in the returned series) of zero-filled grid points.
    pub filled: Vec<usize>,
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_time(NaiveTime::MIN))
}

/// Reads a `timestamp,value` CSV (with header) into a validated series.
///
/// Row numbers in errors are 1-based data rows, not counting the header.
pub fn load_series(path: impl AsRef<Path>, format: &CsvFormat) -> Result<(RainfallSeries, LoadReport)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_series(file, format)
}

pub fn read_series<R: std::io::Read>(reader: R, format: &CsvFormat) -> Result<(RainfallSeries, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows: Vec<(NaiveDateTime, f64)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        if record.len() < 2 {
            return Err(Error::Parse {
                row,
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let ts = parse_timestamp(&record[0]).ok_or_else(|| Error::Parse {
            row,
            message: format!("unparseable timestamp {:?}", &record[0]),
        })?;
        let value: f64 = record[1].parse().map_err(|_| Error::Parse {
            row,
            message: format!("unparseable value {:?}", &record[1]),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse { row, message: format!("non-finite value {value}") });
        }
        if value < 0.0 {
            return Err(Error::NegativeValue { row, value });
        }
        if format.raw && !is_multiple(value, format.quantum) {
            return Err(Error::Parse {
                row,
                message: format!("value {value} is not a multiple of the quantum {}", format.quantum),
            });
        }
        rows.push((ts, value));
    }
    if rows.len() < 2 {
        return Err(Error::TooShort { len: rows.len(), needed: 2 });
    }

    let step = rows[1].0 - rows[0].0;
    if step <= Duration::zero() {
        return Err(Error::Parse { row: 2, message: "timestamps must be strictly increasing".into() });
    }
    let step_secs = step.num_seconds();
    let mut values = vec![rows[0].1];
    let mut report = LoadReport::default();
    let mut missing = 0usize;
    let mut first_gap = None;
    for i in 1..rows.len() {
        let row = i + 1;
        let diff = (rows[i].0 - rows[i - 1].0).num_seconds();
        if diff <= 0 {
            return Err(Error::Parse { row, message: "timestamps must be strictly increasing".into() });
        }
        if diff % step_secs != 0 {
            return Err(Error::NonUniformGrid { row, expected_secs: step_secs, found_secs: diff });
        }
        let skipped = (diff / step_secs - 1) as usize;
        if skipped > 0 {
            missing += skipped;
            first_gap.get_or_insert(row);
            for _ in 0..skipped {
                report.filled.push(values.len());
                values.push(0.0);
            }
        }
        values.push(rows[i].1);
    }
    if missing > 0 {
        match format.gaps {
            GapPolicy::Reject => {
                return Err(Error::Gaps {
                    count: missing,
                    first_row: first_gap.unwrap_or(0),
                })
            }
            GapPolicy::ZeroFill => log::warn!("filled {missing} missing observations with zero rainfall"),
        }
    }
    let series = RainfallSeries::new(rows[0].0, step, values, format.unit, format.quantum)?;
    Ok((series, report))
}

/// Sums `factor` consecutive values; a trailing remainder is dropped with a warning.
pub fn aggregate(series: &RainfallSeries, factor: usize) -> Result<RainfallSeries> {
    if factor < 1 {
        return Err(Error::invalid("aggregation factor must be at least 1"));
    }
    let remainder = series.len() % factor;
    if remainder != 0 {
        log::warn!("dropping {remainder} trailing observations not filling a full aggregation block");
    }
    let values = series
        .values
        .chunks_exact(factor)
        .map(|c| c.iter().sum())
        .collect();
    Ok(RainfallSeries {
        start_time: series.start_time,
        step_seconds: series.step_seconds * factor as i64,
        values,
        unit: series.unit,
        quantum: series.quantum,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub zero_proportion: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    /// Autocorrelations at lags `1..=h_max`.
    pub sample_acf: Vec<f64>,
}

/// Fraction of values below the measurement quantum.
pub fn zero_proportion(values: &[f64], quantum: f64) -> f64 {
    // tolerance keeps a stored 0.1 from counting as below a 0.1 quantum
    let threshold = quantum * (1.0 - 1e-9);
    values.iter().filter(|&&v| v < threshold).count() as f64 / values.len() as f64
}

pub fn summarize(series: &RainfallSeries, h_max: usize) -> Result<SeriesSummary> {
    summarize_values(&series.values, series.quantum, h_max)
}

pub fn summarize_values(values: &[f64], quantum: f64, h_max: usize) -> Result<SeriesSummary> {
    if values.len() <= h_max || values.len() < 2 {
        return Err(Error::TooShort { len: values.len(), needed: h_max.max(1) + 1 });
    }
    let acvf = stats::autocovariance(values, h_max);
    let variance = acvf[0];
    let mean = stats::mean(values);
    // rounding leaves ~ε²·mean² of spurious variance on a constant series
    if !(variance > 1e-24 * mean * mean) || variance == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let skewness = stats::central_moment(values, 3) / variance.powf(1.5);
    Ok(SeriesSummary {
        zero_proportion: zero_proportion(values, quantum),
        mean,
        variance,
        skewness,
        sample_acf: acvf[1..].iter().map(|c| c / variance).collect(),
    })
}
