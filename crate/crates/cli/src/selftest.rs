//! Fast closed-form checks of the installed engine, one PASS/FAIL line each.

use smcprice_core::barrier::{price_barrier_sis, BarrierModel, BarrierSpec};
use smcprice_core::greeks::{greek_recursion_run, GbmBarrierTransition, GreekParam, TermOrder};
use smcprice_core::models::{bgk_barrier_price, black_scholes_call, black_scholes_call_delta, GbmParams, Interval};
use smcprice_core::normal;
use smcprice_core::report::Estimate;
use smcprice_core::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn within_se(name: &'static str, xs: &[f64], exact: f64, k: f64) -> Check {
    let e = Estimate::from_samples(xs);
    let z = (e.mean - exact).abs() / e.se();
    Check {
        name,
        passed: z <= k,
        detail: format!("mean {:.6} exact {exact:.6} ({z:.2} SE)", e.mean),
    }
}

fn normal_round_trip() -> Check {
    let worst = (1..1000)
        .map(|i| {
            let p = i as f64 / 1000.0;
            (normal::cdf(normal::quantile(p)) - p).abs()
        })
        .fold(0.0, f64::max);
    Check {
        name: "normal quantile inverts cdf",
        passed: worst < 1e-14,
        detail: format!("max error {worst:.2e}"),
    }
}

fn setup(m: usize, lo: f64) -> Result<(BarrierSpec, GbmParams)> {
    let spec = BarrierSpec::uniform(10.0, 10.0, 0.01, Interval::above(lo), m, 0.5)?;
    Ok((spec, GbmParams::new(0.01, 0.75, 10.0)?))
}

/// With a barrier below the strike and one monitoring date the option is a plain call.
fn single_date_call() -> Result<Check> {
    let (spec, p) = setup(1, 5.0)?;
    let model = BarrierModel::Gbm(p);
    let xs = (0..20)
        .map(|s| Ok(price_barrier_sis(&spec, &model, 20_000, s)?.estimate))
        .collect::<Result<Vec<f64>>>()?;
    Ok(within_se(
        "single-date barrier equals Black-Scholes",
        &xs,
        black_scholes_call(10.0, 10.0, 0.01, 0.75, 0.5),
        4.0,
    ))
}

fn inactive_barrier() -> Result<Check> {
    let (spec, p) = setup(5, 1e-6)?;
    let model = BarrierModel::Gbm(p);
    let xs = (0..20)
        .map(|s| Ok(price_barrier_sis(&spec, &model, 20_000, s)?.estimate))
        .collect::<Result<Vec<f64>>>()?;
    Ok(within_se(
        "inactive barrier equals Black-Scholes",
        &xs,
        black_scholes_call(10.0, 10.0, 0.01, 0.75, 2.5),
        4.0,
    ))
}

fn vanilla_delta() -> Result<Check> {
    let (spec, p) = setup(1, 5.0)?;
    let t = GbmBarrierTransition::new(spec, p, GreekParam::Spot)?;
    let xs = (0..20)
        .map(|s| Ok(greek_recursion_run(&t, 1, 2000, s, TermOrder::default())?.sensitivity))
        .collect::<Result<Vec<f64>>>()?;
    Ok(within_se(
        "single-date delta equals Black-Scholes",
        &xs,
        black_scholes_call_delta(10.0, 10.0, 0.01, 0.75, 0.5),
        4.0,
    ))
}

fn bgk_reference() -> Result<Check> {
    let (_, p) = setup(25, 5.0)?;
    let v = bgk_barrier_price(&p, 5.0, 10.0, 25, 0.5)?;
    Ok(Check {
        name: "continuity-corrected barrier reference",
        passed: (v - 6.16).abs() <= 0.05,
        detail: format!("{v:.4}"),
    })
}

pub fn run_selftest() -> Vec<Check> {
    let fallible: [fn() -> Result<Check>; 4] = [single_date_call, inactive_barrier, vanilla_delta, bgk_reference];
    let mut out = vec![normal_round_trip()];
    for f in fallible {
        out.push(f().unwrap_or_else(|e| Check {
            name: "engine error",
            passed: false,
            detail: e.to_string(),
        }));
    }
    out
}
