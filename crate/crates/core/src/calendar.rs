//! Calendar conventions shared by seasonality and pricing.
//!
//! Month-time runs over `[0, 12)` within a year: January occupies `[0, 1)`,
//! February `[1, 2)` and so on, each month stretched uniformly over its real
//! calendar length.

use chrono::{Datelike, NaiveDate, NaiveDateTime, NaiveTime};

pub fn days_in_month(year: i32, month: u32) -> u32 {
    let (ny, nm) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    let next = NaiveDate::from_ymd_opt(ny, nm, 1).expect("valid month");
    let this = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    (next - this).num_days() as u32
}

pub fn month_start(year: i32, month: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(year, month, 1)
        .expect("valid month")
        .and_time(NaiveTime::MIN)
}

/// Fractional month index of `ts` in `[0, 12)`.
pub fn month_time(ts: NaiveDateTime) -> f64 {
    let start = month_start(ts.year(), ts.month());
    let len = days_in_month(ts.year(), ts.month()) as f64 * 86_400.0;
    let into = (ts - start).num_milliseconds() as f64 / 1000.0;
    (ts.month() - 1) as f64 + into / len
}

/// Elapsed days from `from` to `to` (negative if `to` precedes `from`).
pub fn days_between(from: NaiveDateTime, to: NaiveDateTime) -> f64 {
    (to - from).num_milliseconds() as f64 / 86_400_000.0
}
