//! Property checks shared by the property suite and the acceptance run.
#![allow(dead_code)]

use chrono::{Duration, NaiveDate};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use rainfall_carma::carma::acvf_increments;
use rainfall_carma::fit::stationary_resample;
use rainfall_carma::hougaard::charfn_increment;
use rainfall_carma::pricing::{futures_price, EsscherMPR, ObservedState, PricingModel, SwapContract};
use rainfall_carma::seasonality::{deseasonalise, MonthlyTable, SeasonalityModel};
use rainfall_carma::simulate::{apply_seasonality, increments_from_jumps, stream_rng, Jump};
use rainfall_carma::{CarmaSpec, HougaardParams, Unit};

pub type Check = fn(u32) -> Result<(), String>;

/// Every shared property with a short name.
pub const PROPERTIES: [(&str, Check); 6] = [
    ("characteristic function bounds and conjugation", charfn_bounds),
    ("autocovariance positive semidefinite", acvf_psd),
    ("bootstrap block length and marginal uniformity", bootstrap_distribution),
    ("deseasonalise/apply round trip", seasonal_round_trip),
    ("price monotone in theta", price_monotone),
    ("single jump integrated exactly", single_jump_exact),
];

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

pub fn hougaard_strategy() -> impl Strategy<Value = HougaardParams> {
    (0.2f64..10.0, 0.5f64..200.0, 1.05f64..1.95).prop_map(|(m, r, k)| HougaardParams::new(m, r, k).unwrap())
}

/// Specs of order 1 to 3 with well-separated rates and non-negative weights.
pub fn spec_strategy() -> impl Strategy<Value = CarmaSpec> {
    (1usize..=3, prop::collection::vec(0.05f64..8.0, 3), prop::collection::vec(0.05f64..1.0, 3)).prop_filter_map(
        "rates too close",
        |(p, rates, raw)| {
            let mut rates = rates[..p].to_vec();
            rates.sort_by(|a, b| b.total_cmp(a));
            if rates.windows(2).any(|w| w[0] - w[1] < 0.05 * w[0]) {
                return None;
            }
            let total: f64 = raw[..p].iter().sum();
            let weights = raw[..p].iter().map(|w| w / total).collect();
            CarmaSpec::new(rates, weights).ok()
        },
    )
}

pub fn charfn_bounds(cases: u32) -> Result<(), String> {
    run(cases, (spec_strategy(), hougaard_strategy(), 0.01f64..20.0, 0.2f64..2.0), |(spec, params, u, delta)| {
        let a = charfn_increment(&spec, &params, delta, u).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let b = charfn_increment(&spec, &params, delta, -u).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let zero = charfn_increment(&spec, &params, delta, 0.0).unwrap();
        prop_assert!(a.norm() <= 1.0 + 1e-12, "|phi({})| = {}", u, a.norm());
        prop_assert!((a - b.conj()).norm() < 1e-12, "phi(-u) = {} vs conj phi(u) = {}", b, a.conj());
        prop_assert_eq!(zero.re, 1.0);
        Ok(())
    })
}

pub fn acvf_psd(cases: u32) -> Result<(), String> {
    run(cases, (spec_strategy(), 0.1f64..3.0), |(spec, delta)| {
        let n = 21;
        let c = acvf_increments(&spec, 1.0, delta, n - 1).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let toeplitz = DMatrix::from_fn(n, n, |i, j| c[i.abs_diff(j)]);
        let min = toeplitz.symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-8 * c[0], "smallest eigenvalue {} for C(0) = {}", min, c[0]);
        prop_assert!(c.iter().all(|v| *v > 0.0), "non-positive autocovariance {:?}", c);
        Ok(())
    })
}

/// Mean block length within 2% over about 10⁵ blocks, and chi-square
/// uniformity of the source index at each output position.
pub fn bootstrap_distribution(cases: u32) -> Result<(), String> {
    run(cases.div_ceil(8).max(2), (1.5f64..30.0, any::<u64>()), |(mean_block, seed)| {
        // distinct values reveal block boundaries as breaks in the +1 sequence
        let n = (100_000.0 * mean_block) as usize;
        let source: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let out = stationary_resample(&source, mean_block, &mut stream_rng(seed, 0));
        let mut blocks = 1usize;
        for w in out.windows(2) {
            if (w[1] as usize) != (w[0] as usize + 1) % n {
                blocks += 1;
            }
        }
        // a restart lands on the successor with probability 1/n, negligible here
        let mean = n as f64 / blocks as f64;
        prop_assert!(
            (mean - mean_block).abs() < 0.02 * mean_block,
            "mean block {} vs {}",
            mean,
            mean_block
        );

        let len = 50;
        let source: Vec<f64> = (0..len).map(|i| i as f64).collect();
        let reps = 10_000;
        let mut counts = vec![vec![0usize; len]; len];
        for r in 0..reps {
            let out = stationary_resample(&source, mean_block, &mut stream_rng(seed ^ 0x5eed, r));
            for (pos, v) in out.iter().enumerate() {
                counts[pos][*v as usize] += 1;
            }
        }
        let expected = reps as f64 / len as f64;
        // positions 0 and len/2 span the start and the middle of each resample
        for pos in [0, len / 2, len - 1] {
            let chi2: f64 = counts[pos].iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
            let p = chi_square_sf(chi2, (len - 1) as f64);
            prop_assert!(p > 0.001, "position {}: chi2 {} p {}", pos, chi2, p);
        }
        Ok(())
    })
}

/// Upper tail of the chi-square law.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    1.0 - ChiSquared::new(dof).unwrap().cdf(x)
}

fn seasonality_strategy() -> impl Strategy<Value = SeasonalityModel> {
    (0.5f64..3.0, prop::collection::vec((-0.2f64..0.2, -0.2f64..0.2), 0..=3)).prop_map(|(level, coefs)| {
        SeasonalityModel::new(
            2.0 * level,
            coefs.iter().map(|c| c.0 * level).collect(),
            coefs.iter().map(|c| c.1 * level).collect(),
        )
        .unwrap()
    })
}

pub fn seasonal_round_trip(cases: u32) -> Result<(), String> {
    run(
        cases,
        (seasonality_strategy(), prop::collection::vec(0.0f64..50.0, 1..400), 0i64..3, 1990i32..2020),
        |(model, values, step_kind, year)| {
            let step = [Duration::hours(1), Duration::days(1), Duration::minutes(30)][step_kind as usize];
            let start = NaiveDate::from_ymd_opt(year, 2, 27).unwrap().and_hms_opt(0, 0, 0).unwrap();
            let series = apply_seasonality(&values, &model, start, step, Unit::Mm, 0.1)
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            let back = deseasonalise(&series, &model).map_err(|e| TestCaseError::fail(e.to_string()))?;
            for (a, b) in back.iter().zip(&values) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{} vs {}", a, b);
            }
            Ok(())
        },
    )
}

pub fn price_monotone(cases: u32) -> Result<(), String> {
    run(cases, (spec_strategy(), hougaard_strategy(), 1u32..=12, 1.0f64..60.0), |(spec, params, month, lead)| {
        let model = PricingModel::new(spec, params, 1.0, Unit::Mm).unwrap();
        let start = NaiveDate::from_ymd_opt(2021, month, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let valuation = start - Duration::hours((lead * 24.0) as i64);
        let contract = SwapContract::monthly(valuation, 2021, month, Unit::Mm).unwrap();
        let levels = MonthlyTable([0.7; 12]);
        let k = model.bound();
        let mut last = 0.0;
        for frac in [-3.0, -1.0, -0.2, 0.0, 0.2, 0.5, 0.8, 0.95, 0.999] {
            let mpr = EsscherMPR::constant(frac * k, &model.params).unwrap();
            let price = futures_price(&model, &mpr, &contract, &levels, &ObservedState::MeanApproximation)
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!(price > last, "price {} at theta {}k not above {}", price, frac, last);
            last = price;
        }
        Ok(())
    })
}

pub fn single_jump_exact(cases: u32) -> Result<(), String> {
    run(cases, (spec_strategy(), 0.1f64..5.0, 0.01f64..20.0, 0.0f64..1.0, 0.25f64..2.0), |(spec, size, t0, frac, delta)| {
        let length = 40;
        let time = t0.min(length as f64 * delta * frac);
        let incs = increments_from_jumps(&spec, &[Jump { time, size }], delta, length);
        for (i, inc) in incs.iter().enumerate() {
            let a = i as f64 * delta;
            let b = a + delta;
            let exact: f64 = if time >= b {
                0.0
            } else {
                let from = a.max(time);
                spec.components()
                    .map(|(l, w)| size * w * ((-l * (from - time)).exp() - (-l * (b - time)).exp()) / l)
                    .sum()
            };
            prop_assert!((inc - exact).abs() <= 1e-12 * size.max(exact), "step {}: {} vs {}", i, inc, exact);
        }
        Ok(())
    })
}
