//! Black–Scholes (geometric Brownian motion) under the risk-neutral measure.

use rand::distr::{Distribution, Open01};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result, SmcError};
use crate::normal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub r: f64,
    pub sigma: f64,
    pub s0: f64,
}

impl GbmParams {
    pub fn new(r: f64, sigma: f64, s0: f64) -> Result<Self> {
        let p = Self { r, sigma, s0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.s0 > 0.0 && self.r.is_finite()) {
            return invalid(format!(
                "GBM needs sigma > 0 and s0 > 0 (got sigma = {}, s0 = {})",
                self.sigma, self.s0
            ));
        }
        Ok(())
    }

    /// Mean of `log S_{t+dt}` given `log S_t = log_s`.
    #[inline]
    pub fn log_mean(&self, log_s: f64, dt: f64) -> f64 {
        log_s + (self.r - 0.5 * self.sigma * self.sigma) * dt
    }

    #[inline]
    pub fn log_sd(&self, dt: f64) -> f64 {
        self.sigma * dt.sqrt()
    }
}

/// Closed interval `[lo, hi]` of admissible prices; `hi` may be `+inf`, `lo` may be `0` or `-inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return invalid(format!("interval [{lo}, {hi}] is empty"));
        }
        Ok(Self { lo, hi })
    }

    pub fn unbounded() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn above(lo: f64) -> Self {
        Self { lo, hi: f64::INFINITY }
    }

    #[inline]
    pub fn contains(&self, s: f64) -> bool {
        s >= self.lo && s <= self.hi
    }

    /// Interval bounds mapped to standard-normal scores of `log S`.
    #[inline]
    fn z_bounds(&self, mean: f64, sd: f64) -> (f64, f64) {
        let za = if self.lo > 0.0 {
            (self.lo.ln() - mean) / sd
        } else {
            f64::NEG_INFINITY
        };
        let zb = if self.hi == f64::INFINITY {
            f64::INFINITY
        } else if self.hi > 0.0 {
            (self.hi.ln() - mean) / sd
        } else {
            f64::NEG_INFINITY
        };
        (za, zb)
    }
}

/// Log of the lognormal transition density of `S_{t+dt}` at `s_next` given `S_t = s_prev`.
pub fn gbm_log_transition(s_next: f64, s_prev: f64, dt: f64, p: &GbmParams) -> Result<f64> {
    if !(s_next > 0.0 && s_prev > 0.0 && dt > 0.0) {
        return domain(format!(
            "lognormal transition needs positive arguments (s_next = {s_next}, s_prev = {s_prev}, dt = {dt})"
        ));
    }
    let ln_next = s_next.ln();
    let sd = p.log_sd(dt);
    Ok(normal::log_pdf(ln_next, p.log_mean(s_prev.ln(), dt), sd * sd) - ln_next)
}

/// `P(S_{t+dt} in interval | S_t = s_prev)`.
pub fn gbm_survival_prob(s_prev: f64, interval: &Interval, dt: f64, p: &GbmParams) -> f64 {
    let mean = p.log_mean(s_prev.ln(), dt);
    let (za, zb) = interval.z_bounds(mean, p.log_sd(dt));
    normal::interval_prob(za, zb)
}

/// Unconditioned one-step draw.
pub fn gbm_sample<R: Rng + ?Sized>(s_prev: f64, dt: f64, p: &GbmParams, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (p.log_mean(s_prev.ln(), dt) + p.log_sd(dt) * z).exp()
}

/// Exact draw from the transition law truncated to `interval` (inverse CDF on `log S`).
pub fn gbm_sample_conditioned<R: Rng + ?Sized>(
    s_prev: f64,
    interval: &Interval,
    dt: f64,
    p: &GbmParams,
    rng: &mut R,
) -> Result<f64> {
    let mean = p.log_mean(s_prev.ln(), dt);
    let sd = p.log_sd(dt);
    let (za, zb) = interval.z_bounds(mean, sd);
    if normal::interval_prob(za, zb) <= 0.0 {
        return Err(SmcError::ZeroSurvival { s_prev });
    }
    let u: f64 = Open01.sample(rng);
    let z = normal::truncated_quantile(za, zb, u);
    let s = (mean + sd * z).exp().clamp(interval.lo.max(0.0), interval.hi);
    debug_assert!(interval.contains(s));
    Ok(s)
}

pub fn black_scholes_call(s0: f64, k: f64, r: f64, sigma: f64, t: f64) -> f64 {
    if k <= 0.0 {
        return s0 - k * (-r * t).exp();
    }
    let sd = sigma * t.sqrt();
    let d1 = ((s0 / k).ln() + (r + 0.5 * sigma * sigma) * t) / sd;
    let d2 = d1 - sd;
    s0 * normal::cdf(d1) - k * (-r * t).exp() * normal::cdf(d2)
}

pub fn black_scholes_call_delta(s0: f64, k: f64, r: f64, sigma: f64, t: f64) -> f64 {
    let sd = sigma * t.sqrt();
    normal::cdf(((s0 / k).ln() + (r + 0.5 * sigma * sigma) * t) / sd)
}

/// Continuously monitored down-and-out call with barrier `h < s0`, no dividends.
pub fn down_and_out_call(s0: f64, k: f64, h: f64, r: f64, sigma: f64, t: f64) -> f64 {
    if h <= 0.0 {
        return black_scholes_call(s0, k, r, sigma, t);
    }
    if s0 <= h {
        return 0.0;
    }
    let sd = sigma * t.sqrt();
    let lam = (r + 0.5 * sigma * sigma) / (sigma * sigma);
    let disc = (-r * t).exp();
    let hs = h / s0;
    if h <= k {
        let y = (h * h / (s0 * k)).ln() / sd + lam * sd;
        let down_in =
            s0 * hs.powf(2.0 * lam) * normal::cdf(y) - k * disc * hs.powf(2.0 * lam - 2.0) * normal::cdf(y - sd);
        (black_scholes_call(s0, k, r, sigma, t) - down_in).max(0.0)
    } else {
        let x1 = (s0 / h).ln() / sd + lam * sd;
        let y1 = (h / s0).ln() / sd + lam * sd;
        (s0 * normal::cdf(x1) - k * disc * normal::cdf(x1 - sd) - s0 * hs.powf(2.0 * lam) * normal::cdf(y1)
            + k * disc * hs.powf(2.0 * lam - 2.0) * normal::cdf(y1 - sd))
        .max(0.0)
    }
}

/// Continuity-correction constant for discretely monitored barriers.
pub const BGK_BETA: f64 = 0.5826;

/// Discretely monitored down-and-out call (`m` dates spaced `dt`) approximated
/// by the continuous formula at the barrier shifted to `barrier * exp(-beta sigma sqrt(dt))`.
pub fn bgk_barrier_price(p: &GbmParams, barrier: f64, k: f64, m: usize, dt: f64) -> Result<f64> {
    p.validate()?;
    if barrier >= p.s0 {
        return invalid(format!(
            "barrier {barrier} at or above s0 = {}: knocked out at start",
            p.s0
        ));
    }
    if m == 0 || dt <= 0.0 {
        return invalid("need m >= 1 and dt > 0");
    }
    let t = m as f64 * dt;
    let shifted = barrier * (-BGK_BETA * p.sigma * dt.sqrt()).exp();
    Ok(down_and_out_call(p.s0, k, shifted, p.r, p.sigma, t))
}
