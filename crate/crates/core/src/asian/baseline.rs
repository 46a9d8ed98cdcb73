//! Drift-shift importance sampling for the Asian call.
//!
//! Volatility blocks are drawn exactly. The per-period standard deviation is
//! then replaced by its smallest value along the path, which turns the price
//! into a deterministic-volatility model in which a single scalar shift `theta`
//! of every Gaussian increment is chosen from the first-order condition
//! `A'(theta) = m theta (A(theta) - K)`, where `A(theta)` is the average along
//! the path with all increments equal to `theta`. The actual path is then
//! simulated with shifted increments and weighted by the likelihood ratio.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::state::AsianProblem;
use crate::error::{invalid, Result};
use crate::models::bns::advance_unchecked;
use crate::models::bns_sample_vol_block;
use crate::report::Estimate;
use crate::rng::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsOptions {
    pub max_bisection: usize,
    /// Forces `theta = 0`, giving plain Monte Carlo.
    pub zero_shift: bool,
}

impl Default for IsOptions {
    fn default() -> Self {
        Self {
            max_bisection: 300,
            zero_shift: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsRun {
    pub price: f64,
    /// Sample standard deviation of the weighted payoffs.
    pub sample_sd: f64,
    pub n: usize,
    /// Fraction of samples whose bracket failed and fell back to `theta = 0`.
    pub fallback_fraction: f64,
    /// Fraction of samples where the first-order condition changed sign more than once.
    pub non_unique_fraction: f64,
}

struct Proxy {
    /// `S_0 exp(i mu dt)` for `i = 1..=m`.
    base: Vec<f64>,
    s: f64,
    m: f64,
    strike: f64,
}

impl Proxy {
    /// `(A(theta), A'(theta))`.
    fn average(&self, theta: f64) -> (f64, f64) {
        let (mut a, mut da) = (0.0, 0.0);
        for (k, b) in self.base.iter().enumerate() {
            let i = (k + 1) as f64;
            let v = b * (self.s * i * theta).exp();
            a += v;
            da += self.s * i * v;
        }
        (a / self.m, da / self.m)
    }

    fn foc(&self, theta: f64) -> f64 {
        let (a, da) = self.average(theta);
        da - self.m * theta * (a - self.strike)
    }
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, iters: usize) -> f64 {
    let mut flo = f(lo);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Returns `(theta, fell_back, non_unique)`.
fn solve_shift(px: &Proxy, iters: usize) -> (f64, bool, bool) {
    if !(px.s > 0.0) {
        return (0.0, true, false);
    }
    // theta_k with A(theta_k) = K; A is increasing and tends to 0 at -inf.
    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while px.average(lo).0 >= px.strike && grow < 200 {
        lo *= 2.0;
        grow += 1;
    }
    while px.average(hi).0 <= px.strike && grow < 400 {
        hi *= 2.0;
        grow += 1;
    }
    if !(px.average(lo).0 < px.strike && px.average(hi).0 > px.strike) {
        return (0.0, true, false);
    }
    let theta_k = bisect(lo, hi, |t| px.average(t).0 - px.strike, iters);
    // Past theta_k the condition is positive; find where it turns negative.
    let mut top = theta_k.abs().max(1.0);
    let mut grow = 0;
    while px.foc(theta_k + top) > 0.0 && grow < 200 {
        top *= 2.0;
        grow += 1;
    }
    let hi = theta_k + top;
    if !(px.foc(hi) < 0.0) {
        return (0.0, true, false);
    }
    let grid = 64;
    let mut changes = 0;
    let mut prev = px.foc(theta_k + (hi - theta_k) * 1e-9);
    for g in 1..=grid {
        let v = px.foc(theta_k + (hi - theta_k) * g as f64 / grid as f64);
        if (v > 0.0) != (prev > 0.0) {
            changes += 1;
        }
        prev = v;
    }
    let root = bisect(theta_k, hi, |t| px.foc(t), iters);
    if !root.is_finite() {
        return (0.0, true, false);
    }
    (root, false, changes > 1)
}

/// `n` independent weighted samples; each draws its blocks, solves for the
/// shift, and simulates the shifted path.
pub fn asian_is_baseline(pb: &AsianProblem, n: usize, seed: u64, opts: &IsOptions) -> Result<IsRun> {
    pb.validate()?;
    if n == 0 {
        return invalid("importance sampling needs at least one sample");
    }
    let m = pb.m;
    let base: Vec<f64> = (1..=m)
        .map(|i| pb.params.s0 * (i as f64 * pb.params.mu * pb.dt).exp())
        .collect();
    let disc = pb.discount();
    let rows: Vec<(f64, bool, bool)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, 0, k as u64, Domain::Baseline);
            let mut sd = Vec::with_capacity(m);
            let mut sigma_bar = pb.params.v0;
            for _ in 0..m {
                let block = bns_sample_vol_block(&pb.params, pb.dt, &mut rng);
                let v = advance_unchecked(sigma_bar, &block, &pb.params);
                sigma_bar = v.sigma_bar;
                sd.push(v.sigma_tilde.sqrt());
            }
            let (theta, fell_back, non_unique) = if opts.zero_shift {
                (0.0, false, false)
            } else {
                let px = Proxy {
                    base: base.clone(),
                    s: sd.iter().cloned().fold(f64::INFINITY, f64::min),
                    m: m as f64,
                    strike: pb.strike,
                };
                solve_shift(&px, opts.max_bisection)
            };
            let mut log_s = pb.params.s0.ln();
            let mut sum = 0.0;
            let mut z_sum = 0.0;
            for s in &sd {
                let eps: f64 = StandardNormal.sample(&mut rng);
                let z = theta + eps;
                z_sum += z;
                log_s += pb.params.mu * pb.dt + s * z;
                sum += log_s.exp();
            }
            let payoff = (sum / m as f64 - pb.strike).max(0.0);
            let lr = (-theta * z_sum + 0.5 * m as f64 * theta * theta).exp();
            (disc * payoff * lr, fell_back, non_unique)
        })
        .collect();
    let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let est = Estimate::from_samples(&values);
    let nf = n as f64;
    Ok(IsRun {
        price: est.mean,
        sample_sd: est.sd,
        n,
        fallback_fraction: rows.iter().filter(|r| r.1).count() as f64 / nf,
        non_unique_fraction: rows.iter().filter(|r| r.2).count() as f64 / nf,
    })
}
