use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use rainfall_carma::pricing::{
    advance_components, tilted_index_paths, tilted_law, tilted_monte_carlo, CustomTransform, EsscherMPR,
    ObservedState, Payoff, PayoffSpec, PricingModel, SwapContract,
};
use rainfall_carma::reference;
use rainfall_carma::seasonality::MonthlyLevels;
use rainfall_carma::simulate::{sample_jumps, stream_rng};
use rainfall_carma::{futures_price, riskneutral_expectation, Error, Unit};

fn march() -> (PricingModel, SwapContract) {
    (reference::detroit_model(), reference::detroit_contracts()[0].clone())
}

#[test]
fn capped_call_fourier_matches_monte_carlo() {
    let (model, contract) = march();
    let state = ObservedState::MeanApproximation;
    for theta in [0.0, 0.015] {
        let mpr = EsscherMPR::constant(theta, &model.params).unwrap();
        let mean = riskneutral_expectation(&model, &mpr, &contract, &PayoffSpec::new(Payoff::Swap), &state)
            .unwrap()
            .value;
        let payoff = Payoff::CappedCall { strike: 0.9 * mean, cap: 1.3 * mean };
        let fourier = riskneutral_expectation(&model, &mpr, &contract, &PayoffSpec::new(payoff.clone()), &state).unwrap();
        let mc = tilted_monte_carlo(&model, &mpr, &contract, &state, &payoff, 100_000, 31).unwrap();
        let z = (mc.mean - fourier.value) / mc.std_error;
        assert!(z.abs() < 4.0, "theta {theta}: Fourier {} vs MC {} ± {}", fourier.value, mc.mean, mc.std_error);
        assert!(fourier.value > 0.0 && fourier.value < 0.4 * mean);
    }
}

#[test]
fn call_is_dominated_and_convex_in_strike() {
    let (model, contract) = march();
    let mpr = EsscherMPR::constant(0.005, &model.params).unwrap();
    let state = ObservedState::MeanApproximation;
    let value = |payoff| riskneutral_expectation(&model, &mpr, &contract, &PayoffSpec::new(payoff), &state).unwrap().value;
    let swap = value(Payoff::Swap);
    let calls: Vec<f64> = [10.0, 20.0, 30.0, 40.0, 50.0].map(|k| value(Payoff::Call { strike: k })).to_vec();
    assert!(calls[0] <= swap);
    for w in calls.windows(3) {
        assert!(w[0] > w[1] && w[1] > w[2]);
        assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9, "not convex: {w:?}");
    }
    // put-call parity with a zero strike
    assert!((value(Payoff::Call { strike: 0.0 }) - swap).abs() < 1e-8 * swap);
}

#[test]
fn custom_second_moment_matches_monte_carlo() {
    let (model, contract) = march();
    let mpr = EsscherMPR::constant(0.01, &model.params).unwrap();
    let state = ObservedState::MeanApproximation;
    // x² has Laplace transform 2/z³
    let square = Payoff::Custom(CustomTransform(Arc::new(|z: Complex64| 2.0 / (z * z * z))));
    let damping = 0.25 * model.bound();
    let fourier =
        riskneutral_expectation(&model, &mpr, &contract, &PayoffSpec::new(square.clone()).with_damping(damping), &state)
            .unwrap();
    let paths = tilted_index_paths(&model, &mpr, &contract, &state, 100_000, 8).unwrap();
    let sq: Vec<f64> = paths.iter().map(|x| x * x).collect();
    let n = sq.len() as f64;
    let m = sq.iter().sum::<f64>() / n;
    let se = (sq.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!(((m - fourier.value) / se).abs() < 4.0, "Fourier {} vs MC {m} ± {se}", fourier.value);

    let missing = riskneutral_expectation(&model, &mpr, &contract, &PayoffSpec::new(square.clone()), &state);
    assert!(matches!(missing, Err(Error::InvalidArgument(_))), "{missing:?}");
    assert!(tilted_monte_carlo(&model, &mpr, &contract, &state, &square, 10, 1).is_err());
}

#[test]
fn tilted_jump_law_has_tilted_mean() {
    let params = reference::detroit_params();
    let theta = 0.02;
    let law = tilted_law(&params, theta).unwrap();
    let k = model_bound(&params);
    let expected = params.mu * (1.0 - theta / k).powf(-1.0 / (params.kappa - 1.0));
    assert!((law.mean() / expected - 1.0).abs() < 1e-12);
    let horizon = 200_000.0;
    let jumps = sample_jumps(&law, 0.0, horizon, &mut stream_rng(3, 0)).unwrap();
    let total: f64 = jumps.iter().map(|j| j.size).sum();
    let se = (law.variance() / horizon).sqrt();
    assert!(((total / horizon - expected) / se).abs() < 4.0, "{} vs {expected}", total / horizon);
}

fn model_bound(params: &rainfall_carma::HougaardParams) -> f64 {
    rainfall_carma::exp_moment_bound(params)
}

/// Under the pricing measure the futures price is a martingale in the
/// valuation time: averaging the price a few hours later over tilted paths
/// of the state recovers today's price.
#[test]
fn futures_price_is_a_martingale() {
    let model = reference::heathrow_model();
    let theta = 0.4 * model.bound();
    let mpr = EsscherMPR::constant(theta, &model.params).unwrap();
    let levels = reference::heathrow_monthly_levels();
    let at = |d: u32, h: u32| chrono::NaiveDate::from_ymd_opt(2011, 3, d).unwrap().and_hms_opt(h, 0, 0).unwrap();
    let valuation = at(1, 0);
    let (start, end) = (at(1, 8), at(2, 8));
    let x0 = model.mean_components();
    let today = SwapContract::new(valuation, start, end, "day", Unit::Mm).unwrap();
    let price0 = futures_price(&model, &mpr, &today, &levels, &ObservedState::Components { values: x0.clone() }).unwrap();

    let hours = 6;
    let later = SwapContract::new(at(1, hours), start, end, "day", Unit::Mm).unwrap();
    let elapsed = hours as f64;
    let law = tilted_law(&model.params, theta).unwrap();
    let prices: Vec<f64> = (0..40_000u64)
        .into_par_iter()
        .map(|i| {
            let jumps = sample_jumps(&law, 0.0, elapsed, &mut stream_rng(77, i)).unwrap();
            let x = advance_components(&model.spec, &x0, &jumps, elapsed);
            futures_price(&model, &mpr, &later, &levels, &ObservedState::Components { values: x }).unwrap()
        })
        .collect();
    let n = prices.len() as f64;
    let mean = prices.iter().sum::<f64>() / n;
    let se = (prices.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    // the state carries information over a few hours
    assert!(se * n.sqrt() > 0.05 * price0, "degenerate spread {}", se * n.sqrt());
    assert!(((mean - price0) / se).abs() < 4.0, "{mean} ± {se} vs {price0}");
}

#[test]
fn prices_explode_near_the_moment_bound() {
    let (model, contract) = march();
    let levels = reference::detroit_monthly_levels();
    let k = model.bound();
    let price = |theta: f64| {
        let mpr = EsscherMPR::constant(theta, &model.params).unwrap();
        futures_price(&model, &mpr, &contract, &levels, &ObservedState::MeanApproximation).unwrap()
    };
    let near = price(k * (1.0 - 1e-4));
    let moderate = price(0.03);
    assert!(near / moderate > 5.0, "{near} vs {moderate}");
    assert!(matches!(EsscherMPR::constant(k, &model.params), Err(Error::MomentBound { .. })));
}

#[test]
fn fourier_needs_damping_inside_the_moment_region() {
    let (model, contract) = march();
    let mpr = EsscherMPR::constant(0.02, &model.params).unwrap();
    let state = ObservedState::MeanApproximation;
    let too_far = PayoffSpec::new(Payoff::Call { strike: 30.0 }).with_damping(10.0 * model.bound());
    assert!(riskneutral_expectation(&model, &mpr, &contract, &too_far, &state).is_err());
    let bad_strike = PayoffSpec::new(Payoff::CappedCall { strike: 5.0, cap: 4.0 });
    assert!(matches!(
        riskneutral_expectation(&model, &mpr, &contract, &bad_strike, &state),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn swap_price_scales_with_the_seasonal_level() {
    let (model, contract) = march();
    let mpr = EsscherMPR::constant(0.01, &model.params).unwrap();
    let levels = reference::detroit_monthly_levels();
    let double = rainfall_carma::MonthlyTable(levels.0.map(|l| 2.0 * l));
    let state = ObservedState::MeanApproximation;
    let a = futures_price(&model, &mpr, &contract, &levels, &state).unwrap();
    let b = futures_price(&model, &mpr, &contract, &double, &state).unwrap();
    assert!((b - 2.0 * a).abs() < 1e-12 * b);
    assert!(levels.monthly_level(3).unwrap() > 0.0);
}
