//! Likelihood-ratio sensitivities by the marginal particle recursion.
//!
//! Two weighted clouds are propagated together. `pi_weights` approximate the
//! (unnormalized) marginal law of the state under the product of potentials,
//! and `lambda_weights` approximate the signed measure obtained by
//! differentiating that law in the parameter. New particles are drawn from
//! the mixture of transitions out of the previous cloud and reweighted
//! against the full mixture, which costs `O(N^2)` per step but never follows
//! ancestral paths, so there is no path degeneracy to fight.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barrier::BarrierSpec;
use crate::error::{invalid, Result, SmcError};
use crate::models::{GbmParams, Interval};
use crate::normal::LN_SQRT_2PI;
use crate::report::Estimate;
use crate::rng::{stream, Domain, StreamRng};
use crate::smc::systematic_indices;

/// Markov transition with an analytic parameter derivative and per-step potentials.
pub trait DifferentiableTransition: Sync {
    type State: Clone + Send + Sync;

    fn initial_state(&self) -> Self::State;

    fn sample(&self, n: usize, prev: &Self::State, rng: &mut StreamRng) -> Self::State;

    /// `(p(next | prev), d/dtheta p(next | prev))` for step `n >= 1`.
    fn density_and_derivative(&self, n: usize, next: &Self::State, prev: &Self::State) -> (f64, f64);

    /// Potential applied at step `n`.
    fn potential(&self, n: usize, x: &Self::State) -> f64;

    /// True when the derivative is identically zero at step `n`.
    fn derivative_vanishes(&self, _n: usize) -> bool {
        false
    }
}

/// Order in which the two signed-measure terms are combined for each new particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TermOrder {
    #[default]
    TransitionFirst,
    DerivativeFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreekStep {
    pub lambda_sum: f64,
    pub pi_sum: f64,
}

#[derive(Debug, Clone)]
pub struct SignedCloud<S> {
    pub states: Vec<S>,
    pub lambda_weights: Vec<f64>,
    pub pi_weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GreekRun<S> {
    /// Estimate of the sensitivity, `sum(lambda_weights)` at step `m`.
    pub sensitivity: f64,
    /// Estimate of the value, `sum(pi_weights)` at step `m`.
    pub value: f64,
    pub trace: Vec<GreekStep>,
    pub cloud: SignedCloud<S>,
}

pub fn greek_recursion_run<T: DifferentiableTransition>(
    model: &T,
    m: usize,
    n: usize,
    seed: u64,
    order: TermOrder,
) -> Result<GreekRun<T::State>> {
    if m == 0 || n == 0 {
        return invalid("greek recursion needs m >= 1 and N >= 1");
    }
    let nf = n as f64;
    let x0 = model.initial_state();

    // Step 1: importance sampling against the first transition itself.
    let first: Vec<(T::State, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, 1, i as u64, Domain::Greeks);
            let x = model.sample(1, &x0, &mut rng);
            let (p, dp) = model.density_and_derivative(1, &x, &x0);
            let phi = model.potential(1, &x);
            if !(p > 0.0) {
                return (x, f64::NAN, f64::NAN);
            }
            let pi = if phi == 0.0 { 0.0 } else { phi / nf };
            let lambda = if phi == 0.0 { 0.0 } else { phi * (dp / p) / nf };
            (x, lambda, pi)
        })
        .collect();
    if let Some(i) = first.iter().position(|t| t.2.is_nan()) {
        return Err(SmcError::SupportViolation { step: 1, particle: i });
    }
    let mut cloud = SignedCloud {
        states: Vec::with_capacity(n),
        lambda_weights: Vec::with_capacity(n),
        pi_weights: Vec::with_capacity(n),
    };
    for (x, l, p) in first {
        cloud.states.push(x);
        cloud.lambda_weights.push(l);
        cloud.pi_weights.push(p);
    }
    let mut trace = vec![step_sums(&cloud)];

    for step in 2..=m {
        cloud = advance(model, &cloud, step, n, seed, order)?;
        trace.push(step_sums(&cloud));
    }
    let last = *trace.last().unwrap();
    Ok(GreekRun {
        sensitivity: last.lambda_sum,
        value: last.pi_sum,
        trace,
        cloud,
    })
}

fn step_sums<S>(c: &SignedCloud<S>) -> GreekStep {
    GreekStep {
        lambda_sum: c.lambda_weights.iter().sum(),
        pi_sum: c.pi_weights.iter().sum(),
    }
}

fn advance<T: DifferentiableTransition>(
    model: &T,
    prev: &SignedCloud<T::State>,
    step: usize,
    n: usize,
    seed: u64,
    order: TermOrder,
) -> Result<SignedCloud<T::State>> {
    let nf = n as f64;
    let total: f64 = prev.pi_weights.iter().sum();
    if !(total > 0.0) {
        return Err(SmcError::DegenerateCloud { step: step - 1 });
    }
    // Mixture components with any mass in either measure.
    let live: Vec<usize> = (0..prev.states.len())
        .filter(|&j| prev.pi_weights[j] > 0.0 || prev.lambda_weights[j] != 0.0)
        .collect();
    let log_pi: Vec<f64> = prev.pi_weights.iter().map(|w| w.ln()).collect();
    let mut rng = stream(seed, step as u64, u64::MAX, Domain::Greeks);
    let u: f64 = rand::Rng::random(&mut rng);
    let ancestors = systematic_indices(&log_pi, u, step - 1)?;
    let skip_derivative = model.derivative_vanishes(step);

    let rows: Vec<(T::State, f64, f64)> = ancestors
        .par_iter()
        .enumerate()
        .map(|(i, &a)| {
            let mut rng = stream(seed, step as u64, i as u64, Domain::Greeks);
            let x = model.sample(step, &prev.states[a], &mut rng);
            let phi = model.potential(step, &x);
            let (mut s_pi, mut s_lambda, mut s_deriv) = (0.0, 0.0, 0.0);
            for &j in &live {
                let (p, dp) = model.density_and_derivative(step, &x, &prev.states[j]);
                s_pi += prev.pi_weights[j] * p;
                s_lambda += prev.lambda_weights[j] * p;
                if !skip_derivative {
                    s_deriv += prev.pi_weights[j] * dp;
                }
            }
            if !(s_pi > 0.0) {
                return (x, f64::NAN, f64::NAN);
            }
            // Psi(x) = s_pi / total, so 1 / (N Psi(x)) = total / (N s_pi).
            let scale = total / (nf * s_pi);
            let signed = match order {
                TermOrder::TransitionFirst => s_lambda + s_deriv,
                TermOrder::DerivativeFirst => s_deriv + s_lambda,
            };
            let lambda = if phi == 0.0 { 0.0 } else { phi * signed * scale };
            let pi = if phi == 0.0 { 0.0 } else { phi * total / nf };
            (x, lambda, pi)
        })
        .collect();
    if let Some(i) = rows.iter().position(|r| r.2.is_nan()) {
        return Err(SmcError::SupportViolation { step, particle: i });
    }
    let mut out = SignedCloud {
        states: Vec::with_capacity(n),
        lambda_weights: Vec::with_capacity(n),
        pi_weights: Vec::with_capacity(n),
    };
    for (x, l, p) in rows {
        out.states.push(x);
        out.lambda_weights.push(l);
        out.pi_weights.push(p);
    }
    Ok(out)
}

/// Parameter a Black–Scholes sensitivity is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GreekParam {
    /// Delta: derivative in the initial price.
    Spot,
    /// Vega: derivative in the volatility.
    Vol,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmPoint {
    pub s: f64,
    pub ln_s: f64,
}

impl GbmPoint {
    pub fn new(s: f64) -> Self {
        Self { s, ln_s: s.ln() }
    }
}

/// Black–Scholes transitions with barrier indicators before maturity and the
/// discounted call payoff (times the indicator) at maturity.
#[derive(Debug, Clone)]
pub struct GbmBarrierTransition {
    pub spec: BarrierSpec,
    pub params: GbmParams,
    pub theta: GreekParam,
}

impl GbmBarrierTransition {
    pub fn new(spec: BarrierSpec, params: GbmParams, theta: GreekParam) -> Result<Self> {
        spec.validate()?;
        params.validate()?;
        let s0 = spec.s0;
        Ok(Self {
            spec,
            params: GbmParams { s0, ..params },
            theta,
        })
    }

    /// Copy with the differentiated parameter moved to `value`.
    pub fn with_theta(&self, value: f64) -> Self {
        let mut out = self.clone();
        match self.theta {
            GreekParam::Spot => {
                out.params.s0 = value;
                out.spec.s0 = value;
            }
            GreekParam::Vol => out.params.sigma = value,
        }
        out
    }

    pub fn theta_value(&self) -> f64 {
        match self.theta {
            GreekParam::Spot => self.params.s0,
            GreekParam::Vol => self.params.sigma,
        }
    }

    pub fn density(&self, n: usize, next: f64, prev: f64) -> f64 {
        self.density_and_derivative(n, &GbmPoint::new(next), &GbmPoint::new(prev))
            .0
    }
}

impl DifferentiableTransition for GbmBarrierTransition {
    type State = GbmPoint;

    fn initial_state(&self) -> GbmPoint {
        GbmPoint::new(self.params.s0)
    }

    fn sample(&self, n: usize, prev: &GbmPoint, rng: &mut StreamRng) -> GbmPoint {
        let dt = self.spec.dt(n);
        let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
        let ln_s = self.params.log_mean(prev.ln_s, dt) + self.params.log_sd(dt) * z;
        GbmPoint { s: ln_s.exp(), ln_s }
    }

    #[inline]
    fn density_and_derivative(&self, n: usize, next: &GbmPoint, prev: &GbmPoint) -> (f64, f64) {
        let dt = self.spec.dt(n);
        let sigma = self.params.sigma;
        let sd = sigma * dt.sqrt();
        let d = next.ln_s - self.params.log_mean(prev.ln_s, dt);
        let z = d / sd;
        let p = (-0.5 * z * z - LN_SQRT_2PI).exp() / (sd * next.s);
        let dp = match self.theta {
            GreekParam::Spot if n == 1 => p * z / (sd * prev.s),
            GreekParam::Spot => 0.0,
            GreekParam::Vol => p * ((z * z - 1.0) / sigma - z * dt.sqrt()),
        };
        (p, dp)
    }

    fn potential(&self, n: usize, x: &GbmPoint) -> f64 {
        let iv: &Interval = &self.spec.intervals[n - 1];
        if !iv.contains(x.s) {
            return 0.0;
        }
        if n == self.spec.m() {
            self.spec.discount() * (x.s - self.spec.strike).max(0.0)
        } else {
            1.0
        }
    }

    fn derivative_vanishes(&self, n: usize) -> bool {
        matches!(self.theta, GreekParam::Spot) && n >= 2
    }
}

/// Delta and vega of the discretely monitored barrier call, over `reps`
/// independent runs seeded `seed, seed + 1, ...`.
pub fn barrier_delta_vega(
    spec: &BarrierSpec,
    p: &GbmParams,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<(Estimate, Estimate)> {
    let delta_model = GbmBarrierTransition::new(spec.clone(), *p, GreekParam::Spot)?;
    let vega_model = GbmBarrierTransition::new(spec.clone(), *p, GreekParam::Vol)?;
    let mut deltas = Vec::with_capacity(reps);
    let mut vegas = Vec::with_capacity(reps);
    for rep in 0..reps {
        let s = crate::rng::rep_seed(seed, rep);
        deltas.push(greek_recursion_run(&delta_model, spec.m(), n, s, TermOrder::default())?.sensitivity);
        vegas.push(greek_recursion_run(&vega_model, spec.m(), n, s, TermOrder::default())?.sensitivity);
    }
    Ok((Estimate::from_samples(&deltas), Estimate::from_samples(&vegas)))
}

/// Central difference `(f(theta + h) - f(theta - h)) / 2h`. The pricer must
/// reuse its random numbers across calls.
pub fn finite_difference_greek<F>(pricer: F, theta: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(h > 0.0) {
        return invalid(format!("finite-difference step {h} must be positive"));
    }
    Ok((pricer(theta + h)? - pricer(theta - h)?) / (2.0 * h))
}
