//! Repetition runners. Repetition `r` uses seed `base + r`; repetitions run
//! in parallel and are collected in index order, so outputs do not depend on
//! the worker count.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use smcprice_core::asian::{asian_is_baseline, asian_smc_price, IsOptions};
use smcprice_core::barrier::{price_barrier_sir, price_barrier_sis, price_barrier_tempered, BarrierModel};
use smcprice_core::greeks::{
    finite_difference_greek, greek_recursion_run, GbmBarrierTransition, GreekParam, TermOrder,
};
use smcprice_core::models::bgk_barrier_price;
use smcprice_core::report::{RepRow, RunReport};
use smcprice_core::rng::rep_seed;
use smcprice_core::Result as EngineResult;

use crate::config::{AsianMethod, AsianSection, BarrierMethod, BarrierSection, Config, GreeksSection};
use crate::error::{config_err, CliResult};

/// Named per-repetition quantities beyond the common row fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extras {
    pub columns: Vec<&'static str>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutput {
    pub experiment: &'static str,
    pub method: &'static str,
    pub particles: usize,
    pub report: RunReport,
    pub extras: Extras,
    /// Closed-form or approximate reference value, if one exists.
    pub reference: Option<f64>,
}

impl ExperimentOutput {
    pub fn median_resamples(&self) -> f64 {
        let mut r: Vec<usize> = self.report.rows.iter().map(|x| x.resample_epochs).collect();
        r.sort_unstable();
        let k = r.len();
        if k == 0 {
            f64::NAN
        } else if k % 2 == 1 {
            r[k / 2] as f64
        } else {
            0.5 * (r[k / 2 - 1] + r[k / 2]) as f64
        }
    }

    /// Column of an extra quantity across repetitions.
    pub fn extra(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.extras.columns.iter().position(|c| *c == name)?;
        Some(self.extras.values.iter().map(|v| v[k]).collect())
    }
}

struct Rep {
    row: RepRow,
    trace: Vec<f64>,
    extras: Vec<f64>,
}

fn run_reps<F>(reps: usize, base: u64, f: F) -> CliResult<Vec<Rep>>
where
    F: Fn(u64) -> EngineResult<(f64, f64, usize, Vec<f64>, Vec<f64>)> + Sync,
{
    let out: EngineResult<Vec<Rep>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let seed = rep_seed(base, rep);
            let t = Instant::now();
            let (estimate, ess_final, resample_epochs, trace, extras) = f(seed)?;
            let wall_ms = t.elapsed().as_secs_f64() * 1e3;
            Ok(Rep {
                row: RepRow {
                    rep,
                    seed,
                    estimate,
                    ess_final,
                    resample_epochs,
                    wall_ms,
                },
                trace,
                extras,
            })
        })
        .collect();
    Ok(out?)
}

fn assemble(
    experiment: &'static str,
    method: &'static str,
    particles: usize,
    columns: Vec<&'static str>,
    reps: Vec<Rep>,
    reference: Option<f64>,
) -> ExperimentOutput {
    let mut rows = Vec::with_capacity(reps.len());
    let mut traces = Vec::with_capacity(reps.len());
    let mut values = Vec::with_capacity(reps.len());
    for r in reps {
        rows.push(r.row);
        traces.push(r.trace);
        values.push(r.extras);
    }
    ExperimentOutput {
        experiment,
        method,
        particles,
        report: RunReport::new(rows, traces),
        extras: Extras { columns, values },
        reference,
    }
}

pub fn run_barrier(c: &BarrierSection) -> CliResult<ExperimentOutput> {
    c.validate()?;
    let spec = c.spec()?;
    let model = c.model()?;
    let resample = c.resample();
    let potential = c.potential();
    let method = c.method;
    let reps = run_reps(c.reps, c.seed, |seed| {
        let run = match method {
            BarrierMethod::Sis => price_barrier_sis(&spec, &model, c.particles, seed)?,
            BarrierMethod::Sir => price_barrier_sir(&spec, &model, c.particles, seed, &resample)?,
            BarrierMethod::Tempered => price_barrier_tempered(&spec, &model, c.particles, seed, &resample, &potential)?,
        };
        let extras = vec![run.z_hat, run.singular_hits as f64];
        Ok((
            run.estimate,
            run.final_ess(),
            run.resample_count(),
            run.trace.ess,
            extras,
        ))
    })?;
    // The BGK correction applies to a single lower barrier under Black–Scholes.
    let reference = match model {
        BarrierModel::Gbm(p) if c.barrier_hi.is_infinite() && c.barrier_lo > 0.0 => {
            bgk_barrier_price(&p, c.barrier_lo, c.strike, c.m, c.dt).ok()
        }
        _ => None,
    };
    let name = match method {
        BarrierMethod::Sis => "sis",
        BarrierMethod::Sir => "sir",
        BarrierMethod::Tempered => "tempered",
    };
    Ok(assemble(
        "barrier",
        name,
        c.particles,
        vec!["z_hat", "singular_hits"],
        reps,
        reference,
    ))
}

pub fn run_asian(c: &AsianSection) -> CliResult<ExperimentOutput> {
    c.validate()?;
    let pb = c.problem()?;
    match c.method {
        AsianMethod::Smc => {
            let cfg = c.smc_config();
            let reps = run_reps(c.reps, c.seed, |seed| {
                let run = asian_smc_price(&pb, &cfg, seed)?;
                let mut trace = run.stage1.ess.clone();
                trace.extend_from_slice(&run.stage2.ess);
                let extras = vec![run.z_hat, run.stats.price_rate(), run.stats.birth_death_rate()];
                Ok((run.price, run.final_ess(), run.resample_count(), trace, extras))
            })?;
            let columns = vec!["z_hat", "price_acceptance", "birth_death_acceptance"];
            Ok(assemble("asian", "smc", c.particles, columns, reps, None))
        }
        AsianMethod::Is => {
            let opts = IsOptions {
                max_bisection: c.max_bisection,
                zero_shift: false,
            };
            let reps = run_reps(c.reps, c.seed, |seed| {
                let run = asian_is_baseline(&pb, c.is_particles, seed, &opts)?;
                let extras = vec![run.sample_sd, run.fallback_fraction, run.non_unique_fraction];
                // The baseline has no weight trace; its ESS column is reported as 0.
                Ok((run.price, 0.0, 0, Vec::new(), extras))
            })?;
            let columns = vec!["sample_sd", "fallback_fraction", "non_unique_fraction"];
            Ok(assemble("asian", "is", c.is_particles, columns, reps, None))
        }
    }
}

/// Barrier price by conditioned importance sampling, used as the
/// finite-difference oracle. Shared seeds give common random numbers.
fn oracle_price(model: &GbmBarrierTransition, particles: usize, seed: u64) -> EngineResult<f64> {
    let m = BarrierModel::Gbm(model.params);
    Ok(price_barrier_sis(&model.spec, &m, particles, seed)?.estimate)
}

pub fn run_greeks(c: &GreeksSection) -> CliResult<ExperimentOutput> {
    c.validate()?;
    let spec = c.spec()?;
    let params = c.params()?;
    let delta = GbmBarrierTransition::new(spec.clone(), params, GreekParam::Spot)?;
    let vega = GbmBarrierTransition::new(spec, params, GreekParam::Vol)?;
    let m = c.m;
    let reps = run_reps(c.reps, c.seed, |seed| {
        let d = greek_recursion_run(&delta, m, c.particles, seed, TermOrder::default())?;
        let v = greek_recursion_run(&vega, m, c.particles, seed, TermOrder::default())?;
        let (fd_d, fd_v) = if c.fd_particles > 0 {
            let fd = |model: &GbmBarrierTransition| {
                let theta = model.theta_value();
                finite_difference_greek(
                    |x| oracle_price(&model.with_theta(x), c.fd_particles, seed),
                    theta,
                    c.fd_rel_step * theta,
                )
            };
            (fd(&delta)?, fd(&vega)?)
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok((
            d.sensitivity,
            0.0,
            0,
            Vec::new(),
            vec![d.sensitivity, v.sensitivity, d.value, fd_d, fd_v],
        ))
    })?;
    let columns = vec!["delta", "vega", "value", "fd_delta", "fd_vega"];
    Ok(assemble("greeks", "marginal", c.particles, columns, reps, None))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Barrier,
    Asian,
    Greeks,
}

pub fn run(cfg: &Config, which: Experiment) -> CliResult<ExperimentOutput> {
    match which {
        Experiment::Barrier => match &cfg.barrier {
            Some(c) => run_barrier(c),
            None => config_err("missing [barrier] section"),
        },
        Experiment::Asian => match &cfg.asian {
            Some(c) => run_asian(c),
            None => config_err("missing [asian] section"),
        },
        Experiment::Greeks => match &cfg.greeks {
            Some(c) => run_greeks(c),
            None => config_err("missing [greeks] section"),
        },
    }
}
