//! Discretely monitored down-and-out barrier calls.
//!
//! Three estimators share one particle model: every particle is propagated
//! through the one-step transition conditioned to stay inside the monitoring
//! interval and is weighted by the probability of doing so. The tempered
//! variant additionally targets `|s_n - K|^{kappa_n}` from the introduction
//! step onward and corrects for it in the terminal estimate.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::distr::{Distribution, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SmcError};
use crate::models::bns::{advance_unchecked, bns_sample_vol_block};
use crate::models::{gbm_survival_prob, BnsParams, GbmParams, Interval};
use crate::normal;
use crate::rng::StreamRng;
use crate::smc::{estimate_z, sir_run, sis_run, ParticleCloud, ResampleConfig, RunTrace, SequentialModel, SmcOutput};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    /// Admissible interval at each monitoring date.
    pub intervals: Vec<Interval>,
    pub strike: f64,
    /// Discount rate.
    pub rate: f64,
    /// Monitoring dates `t_1 < ... < t_m`; `t_0 = 0`.
    pub monitor_times: Vec<f64>,
    pub s0: f64,
}

impl BarrierSpec {
    /// Same interval at `m` equally spaced dates.
    pub fn uniform(s0: f64, strike: f64, rate: f64, interval: Interval, m: usize, dt: f64) -> Result<Self> {
        let spec = Self {
            intervals: vec![interval; m],
            strike,
            rate,
            monitor_times: (1..=m).map(|i| i as f64 * dt).collect(),
            s0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn m(&self) -> usize {
        self.monitor_times.len()
    }

    /// Length of period `n` (1-based).
    pub fn dt(&self, n: usize) -> f64 {
        let prev = if n == 1 { 0.0 } else { self.monitor_times[n - 2] };
        self.monitor_times[n - 1] - prev
    }

    pub fn maturity(&self) -> f64 {
        *self.monitor_times.last().unwrap_or(&0.0)
    }

    pub fn discount(&self) -> f64 {
        (-self.rate * self.maturity()).exp()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.monitor_times.len();
        if m == 0 || self.intervals.len() != m {
            return invalid("barrier needs m >= 1 monitoring dates, one interval per date");
        }
        let mut prev = 0.0;
        for &t in &self.monitor_times {
            if !(t > prev) {
                return invalid("monitoring dates must be strictly increasing and positive");
            }
            prev = t;
        }
        if !(self.strike > 0.0 && self.s0 > 0.0 && self.rate >= 0.0) {
            return invalid("need strike > 0, s0 > 0, rate >= 0");
        }
        if !self.intervals[0].contains(self.s0) {
            return invalid(format!("s0 = {} starts outside the first interval", self.s0));
        }
        Ok(())
    }
}

/// `|s - K|^{kappa_n}` with `kappa_n = 0` before `intro_step` and
/// `kappa0 + (n - intro_step) kappa_step` from it on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialConfig {
    pub intro_step: usize,
    pub kappa0: f64,
    pub kappa_step: f64,
}

impl PotentialConfig {
    pub fn none() -> Self {
        Self {
            intro_step: 1,
            kappa0: 0.0,
            kappa_step: 0.0,
        }
    }

    pub fn kappa(&self, n: usize) -> f64 {
        if n < self.intro_step || n == 0 {
            0.0
        } else {
            self.kappa0 + (n - self.intro_step) as f64 * self.kappa_step
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.intro_step == 0 || self.intro_step > m.max(1) {
            return invalid(format!("potential intro step {} outside 1..={m}", self.intro_step));
        }
        if !(self.kappa0 >= 0.0 && self.kappa_step >= 0.0) {
            return invalid("temperatures must be nonnegative and nondecreasing");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BarrierModel {
    Gbm(GbmParams),
    /// Volatility blocks proposed from their prior, price conditioned on the integrated variance.
    Bns(BnsParams),
}

impl BarrierModel {
    fn validate(&self) -> Result<()> {
        match self {
            BarrierModel::Gbm(p) => p.validate(),
            BarrierModel::Bns(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParticle {
    pub s: f64,
    /// BNS variance state; unused under Black–Scholes.
    pub sigma_bar: f64,
}

/// Result of one pricing run.
#[derive(Debug, Clone)]
pub struct BarrierRun {
    /// Discounted price estimate.
    pub estimate: f64,
    pub z_hat: f64,
    pub trace: RunTrace,
    pub cloud: ParticleCloud<BarrierParticle>,
    /// Particles that landed exactly on the strike under a potential.
    pub singular_hits: usize,
}

impl BarrierRun {
    pub fn final_ess(&self) -> f64 {
        self.trace.final_ess()
    }

    pub fn resample_count(&self) -> usize {
        self.trace.resample_count()
    }
}

/// Lognormal draw with log-mean `mean`, log-sd `sd`, truncated to `iv`.
/// Returns the draw and the log of the truncation mass.
fn conditioned_lognormal(mean: f64, sd: f64, iv: &Interval, rng: &mut StreamRng) -> (f64, f64) {
    if !(sd > 0.0) {
        let s = mean.exp();
        let lw = if iv.contains(s) { 0.0 } else { f64::NEG_INFINITY };
        return (s, lw);
    }
    let za = if iv.lo > 0.0 {
        (iv.lo.ln() - mean) / sd
    } else {
        f64::NEG_INFINITY
    };
    let zb = if iv.hi == f64::INFINITY {
        f64::INFINITY
    } else if iv.hi > 0.0 {
        (iv.hi.ln() - mean) / sd
    } else {
        f64::NEG_INFINITY
    };
    let mass = normal::interval_prob(za, zb);
    if mass <= 0.0 {
        return (mean.exp(), f64::NEG_INFINITY);
    }
    let u: f64 = Open01.sample(rng);
    let z = normal::truncated_quantile(za, zb, u);
    let s = (mean + sd * z).exp().clamp(iv.lo.max(0.0), iv.hi);
    (s, mass.ln())
}

struct BarrierSmc<'a> {
    spec: &'a BarrierSpec,
    model: BarrierModel,
    potential: PotentialConfig,
    singular: AtomicUsize,
}

impl BarrierSmc<'_> {
    fn log_potential(&self, n: usize, s: f64) -> f64 {
        let kappa = self.potential.kappa(n);
        if kappa == 0.0 {
            return 0.0;
        }
        let mut d = (s - self.spec.strike).abs();
        if d == 0.0 {
            self.singular.fetch_add(1, Ordering::Relaxed);
            d = f64::EPSILON * self.spec.strike;
        }
        kappa * d.ln()
    }
}

impl SequentialModel for BarrierSmc<'_> {
    type State = BarrierParticle;

    fn sample_initial(&self, _rng: &mut StreamRng) -> BarrierParticle {
        let sigma_bar = match self.model {
            BarrierModel::Gbm(_) => 0.0,
            BarrierModel::Bns(p) => p.v0,
        };
        BarrierParticle {
            s: self.spec.s0,
            sigma_bar,
        }
    }

    fn propose(&self, n: usize, prev: &BarrierParticle, rng: &mut StreamRng) -> BarrierParticle {
        self.propagate(n, prev, rng).0
    }

    fn log_weight(&self, n: usize, prev: &BarrierParticle, next: &BarrierParticle, _rng: &mut StreamRng) -> f64 {
        // Only valid for the Black–Scholes model, where the survival mass depends on `prev` alone.
        let iv = &self.spec.intervals[n - 1];
        let lw = match self.model {
            BarrierModel::Gbm(p) => gbm_survival_prob(prev.s, iv, self.spec.dt(n), &p).ln(),
            BarrierModel::Bns(_) => f64::NAN,
        };
        lw + self.log_potential(n, next.s) - self.log_potential(n - 1, prev.s)
    }

    fn propagate(&self, n: usize, prev: &BarrierParticle, rng: &mut StreamRng) -> (BarrierParticle, f64) {
        let iv = &self.spec.intervals[n - 1];
        let dt = self.spec.dt(n);
        let (next, log_mass) = match self.model {
            BarrierModel::Gbm(p) => {
                let (s, lw) = conditioned_lognormal(p.log_mean(prev.s.ln(), dt), p.log_sd(dt), iv, rng);
                (BarrierParticle { s, sigma_bar: 0.0 }, lw)
            }
            BarrierModel::Bns(p) => {
                let block = bns_sample_vol_block(&p, dt, rng);
                let vol = advance_unchecked(prev.sigma_bar, &block, &p);
                let mean = prev.s.ln() + p.mu * dt;
                let (s, lw) = conditioned_lognormal(mean, vol.sigma_tilde.sqrt(), iv, rng);
                (
                    BarrierParticle {
                        s,
                        sigma_bar: vol.sigma_bar,
                    },
                    lw,
                )
            }
        };
        if log_mass == f64::NEG_INFINITY {
            return (*prev, f64::NEG_INFINITY);
        }
        let lw = log_mass + self.log_potential(n, next.s) - self.log_potential(n - 1, prev.s);
        (next, lw)
    }
}

fn finish(smc: &BarrierSmc<'_>, out: SmcOutput<BarrierParticle>) -> Result<BarrierRun> {
    let m = smc.spec.m();
    let kappa_m = smc.potential.kappa(m);
    let k = smc.spec.strike;
    let z_hat = estimate_z(&out.z)?;
    let weighted = out.cloud.expectation(|x| {
        let payoff = (x.s - k).max(0.0);
        if kappa_m == 0.0 || payoff == 0.0 {
            payoff
        } else {
            payoff / payoff.powf(kappa_m)
        }
    })?;
    Ok(BarrierRun {
        estimate: smc.spec.discount() * z_hat * weighted,
        z_hat,
        trace: out.trace,
        cloud: out.cloud,
        singular_hits: smc.singular.load(Ordering::Relaxed),
    })
}

fn build<'a>(spec: &'a BarrierSpec, model: &BarrierModel, potential: PotentialConfig) -> Result<BarrierSmc<'a>> {
    spec.validate()?;
    model.validate()?;
    potential.validate(spec.m())?;
    if let BarrierModel::Gbm(p) = model {
        if gbm_survival_prob(spec.s0, &spec.intervals[0], spec.dt(1), p) <= 0.0 {
            return Err(SmcError::ZeroSurvival { s_prev: spec.s0 });
        }
    }
    Ok(BarrierSmc {
        spec,
        model: *model,
        potential,
        singular: AtomicUsize::new(0),
    })
}

/// Conditioned importance sampling without resampling.
pub fn price_barrier_sis(spec: &BarrierSpec, model: &BarrierModel, n: usize, seed: u64) -> Result<BarrierRun> {
    let smc = build(spec, model, PotentialConfig::none())?;
    let out = sis_run(&smc, spec.m(), n, seed)?;
    finish(&smc, out)
}

/// Conditioned importance sampling with ESS-triggered resampling.
pub fn price_barrier_sir(
    spec: &BarrierSpec,
    model: &BarrierModel,
    n: usize,
    seed: u64,
    cfg: &ResampleConfig,
) -> Result<BarrierRun> {
    price_barrier_tempered(spec, model, n, seed, cfg, &PotentialConfig::none())
}

/// SIR towards `|s_n - K|^{kappa_n}`-tilted targets; the terminal estimate
/// divides the payoff by the final potential.
pub fn price_barrier_tempered(
    spec: &BarrierSpec,
    model: &BarrierModel,
    n: usize,
    seed: u64,
    cfg: &ResampleConfig,
    pot: &PotentialConfig,
) -> Result<BarrierRun> {
    let smc = build(spec, model, *pot)?;
    let out = sir_run(&smc, spec.m(), n, seed, cfg)?;
    finish(&smc, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1(m: usize) -> (BarrierSpec, BarrierModel) {
        let spec = BarrierSpec::uniform(10.0, 10.0, 0.01, Interval::above(5.0), m, 0.5).unwrap();
        (spec, BarrierModel::Gbm(GbmParams::new(0.01, 0.75, 10.0).unwrap()))
    }

    #[test]
    fn potential_schedule() {
        let pot = PotentialConfig {
            intro_step: 10,
            kappa0: 0.08,
            kappa_step: 0.045,
        };
        assert_eq!(pot.kappa(9), 0.0);
        assert_eq!(pot.kappa(10), 0.08);
        assert!((pot.kappa(25) - 0.755).abs() < 1e-12);
        assert!(pot.validate(25).is_ok());
        assert!(pot.validate(5).is_err());
    }

    #[test]
    fn conditioned_paths_never_cross() {
        let (spec, model) = table1(10);
        let run = price_barrier_sir(&spec, &model, 2000, 3, &ResampleConfig::half(2000)).unwrap();
        assert!(run.cloud.states.iter().all(|x| x.s >= 5.0));
    }

    #[test]
    fn inactive_barrier_has_unit_weights() {
        let spec = BarrierSpec::uniform(10.0, 10.0, 0.01, Interval::above(0.0), 4, 0.5).unwrap();
        let model = BarrierModel::Gbm(GbmParams::new(0.01, 0.75, 10.0).unwrap());
        let run = price_barrier_sis(&spec, &model, 500, 1).unwrap();
        assert!(run.trace.ess.iter().all(|&e| e == 500.0));
        assert_eq!(run.z_hat, 1.0);
    }

    #[test]
    fn zero_threshold_matches_sis_bitwise() {
        let (spec, model) = table1(6);
        let a = price_barrier_sis(&spec, &model, 1000, 9).unwrap();
        let b = price_barrier_sir(&spec, &model, 1000, 9, &ResampleConfig::disabled()).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn null_potential_matches_sir_bitwise() {
        let (spec, model) = table1(12);
        let cfg = ResampleConfig::half(1500);
        let a = price_barrier_sir(&spec, &model, 1500, 4, &cfg).unwrap();
        let pot = PotentialConfig {
            intro_step: 5,
            kappa0: 0.0,
            kappa_step: 0.0,
        };
        let b = price_barrier_tempered(&spec, &model, 1500, 4, &cfg, &pot).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn starting_outside_is_rejected() {
        assert!(BarrierSpec::uniform(4.0, 10.0, 0.01, Interval::above(5.0), 3, 0.5).is_err());
    }

    #[test]
    fn bns_model_runs_and_respects_barrier() {
        let spec = BarrierSpec::uniform(1.0, 1.0, 0.0, Interval::above(0.6), 6, 0.5).unwrap();
        let model = BarrierModel::Bns(BnsParams::new(0.0, 1.0, 0.2, 1.0).unwrap());
        let run = price_barrier_sir(&spec, &model, 2000, 2, &ResampleConfig::half(2000)).unwrap();
        assert!(run.estimate.is_finite() && run.estimate > 0.0);
        assert!(run.cloud.states.iter().all(|x| x.s >= 0.6));
    }
}
