//! Barndorff-Nielsen–Shephard model with gamma-OU volatility.
//!
//! The volatility increment over a period of length `dt` is driven by a
//! unit-rate Poisson point set on `[0, c] x [0, 1]` with `c = lambda nu dt`.
//! A point `(a, r)` is a jump of size `log(c / a)` arriving at relative time
//! `r`; the jump sizes are standard exponential.

use rand::distr::{Distribution, StandardUniform};
use rand::Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::normal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnsParams {
    /// Drift of the log-price (per year).
    pub mu: f64,
    /// OU decay rate (per year).
    pub lambda: f64,
    /// Jump-intensity scale; also the stationary mean of the variance state.
    pub nu: f64,
    /// Initial variance state.
    pub v0: f64,
    pub s0: f64,
}

impl BnsParams {
    /// `v0` defaults to `nu`.
    pub fn new(mu: f64, lambda: f64, nu: f64, s0: f64) -> Result<Self> {
        let p = Self {
            mu,
            lambda,
            nu,
            v0: nu,
            s0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_v0(mut self, v0: f64) -> Result<Self> {
        self.v0 = v0;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.nu > 0.0 && self.v0 >= 0.0 && self.s0 > 0.0) {
            return invalid(format!("BNS needs lambda > 0, nu > 0, v0 >= 0, s0 > 0 (got {self:?})"));
        }
        if !self.mu.is_finite() {
            return invalid("BNS drift must be finite");
        }
        Ok(())
    }

    /// Side `c = lambda nu dt` of the Poisson rectangle.
    #[inline]
    pub fn rate_extent(&self, dt: f64) -> f64 {
        self.lambda * self.nu * dt
    }
}

/// Poisson points driving one period's volatility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnsVolBlock {
    pub a: Vec<f64>,
    pub r_times: Vec<f64>,
    pub delta: f64,
}

impl BnsVolBlock {
    pub fn empty(delta: f64) -> Self {
        Self {
            a: Vec::new(),
            r_times: Vec::new(),
            delta,
        }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self, p: &BnsParams) -> Result<()> {
        let c = p.rate_extent(self.delta);
        if !(self.delta > 0.0) || self.a.len() != self.r_times.len() {
            return domain("volatility block has mismatched lengths or non-positive period");
        }
        for (&a, &r) in self.a.iter().zip(&self.r_times) {
            if !(a > 0.0 && a <= c) {
                return domain(format!("jump coordinate a = {a} outside (0, {c}]"));
            }
            if !(0.0..=1.0).contains(&r) {
                return domain(format!("arrival time r = {r} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VolState {
    /// Variance state at the end of the period.
    pub sigma_bar: f64,
    /// Integrated variance over the period.
    pub sigma_tilde: f64,
}

impl VolState {
    pub fn initial(v0: f64) -> Self {
        Self {
            sigma_bar: v0,
            sigma_tilde: 0.0,
        }
    }
}

/// Draws a point in `(0, c] x [0, 1]`.
#[inline]
pub(crate) fn sample_point<R: Rng + ?Sized>(c: f64, rng: &mut R) -> (f64, f64) {
    let u: f64 = StandardUniform.sample(rng);
    let r: f64 = StandardUniform.sample(rng);
    (c * (1.0 - u), r)
}

pub fn bns_sample_vol_block<R: Rng + ?Sized>(p: &BnsParams, dt: f64, rng: &mut R) -> BnsVolBlock {
    let c = p.rate_extent(dt);
    let n = match Poisson::new(c) {
        Ok(dist) => dist.sample(rng) as usize,
        Err(_) => 0,
    };
    let mut block = BnsVolBlock {
        a: Vec::with_capacity(n),
        r_times: Vec::with_capacity(n),
        delta: dt,
    };
    for _ in 0..n {
        let (a, r) = sample_point(c, rng);
        block.a.push(a);
        block.r_times.push(r);
    }
    block
}

/// One step of the integrated-variance recursion.
pub fn bns_advance_vol(prev: &VolState, block: &BnsVolBlock, p: &BnsParams) -> Result<VolState> {
    if block.a.len() != block.r_times.len() {
        return domain("volatility block has mismatched lengths");
    }
    if let Some(&a) = block.a.iter().find(|&&a| !(a > 0.0)) {
        return domain(format!("jump coordinate a = {a} makes log(c/a) diverge"));
    }
    Ok(advance_unchecked(prev.sigma_bar, block, p))
}

#[inline]
pub(crate) fn advance_unchecked(prev_sigma_bar: f64, block: &BnsVolBlock, p: &BnsParams) -> VolState {
    let dt = block.delta;
    let c = p.rate_extent(dt);
    let ld = p.lambda * dt;
    let decay = (-ld).exp();
    let (mut g1, mut g2) = (0.0, 0.0);
    for (&a, &r) in block.a.iter().zip(&block.r_times) {
        let size = (c / a).ln();
        g1 += size * (ld * (r - 1.0)).exp();
        g2 += size;
    }
    let sigma_bar = decay * prev_sigma_bar + g1;
    let sigma_tilde = (g2 - sigma_bar + prev_sigma_bar).max(0.0);
    VolState { sigma_bar, sigma_tilde }
}

/// Log-price transition: normal with mean `y_prev + mu dt` and variance `sigma_tilde`.
pub fn bns_logprice_log_transition(y_next: f64, y_prev: f64, sigma_tilde: f64, mu: f64, dt: f64) -> Result<f64> {
    if !(sigma_tilde > 0.0) {
        return domain(format!("integrated variance {sigma_tilde} gives a degenerate density"));
    }
    Ok(normal::log_pdf(y_next, y_prev + mu * dt, sigma_tilde))
}

/// Density of the cumulative sum `nu_i` given `nu_{i-1}` and `nu_{i-2}`:
/// `nu_i - nu_{i-1}` is lognormal with location `log(nu_{i-1} - nu_{i-2}) + mu dt`
/// and log-variance `sigma_tilde`.
pub fn shifted_lognormal_logpdf(
    nu_i: f64,
    nu_prev: f64,
    nu_prev2: f64,
    sigma_tilde: f64,
    mu: f64,
    dt: f64,
) -> Result<f64> {
    if !(nu_i > nu_prev && nu_prev > nu_prev2) {
        return domain(format!(
            "cumulative sums must increase: {nu_prev2} < {nu_prev} < {nu_i}"
        ));
    }
    if !(sigma_tilde > 0.0) {
        return domain(format!("integrated variance {sigma_tilde} gives a degenerate density"));
    }
    Ok(shifted_lognormal_unchecked(
        nu_i,
        nu_prev,
        nu_prev2,
        sigma_tilde,
        mu,
        dt,
    ))
}

/// As [`shifted_lognormal_logpdf`], returning `-inf` outside the support.
#[inline]
pub(crate) fn shifted_lognormal_unchecked(
    nu_i: f64,
    nu_prev: f64,
    nu_prev2: f64,
    sigma_tilde: f64,
    mu: f64,
    dt: f64,
) -> f64 {
    let step = nu_i - nu_prev;
    let last = nu_prev - nu_prev2;
    if !(step > 0.0 && last > 0.0 && sigma_tilde > 0.0) {
        return f64::NEG_INFINITY;
    }
    let ly = step.ln();
    normal::log_pdf(ly, last.ln() + mu * dt, sigma_tilde) - ly
}

/// Log-density of a block's labelled point list under the unit-rate Poisson
/// process on `[0, c] x [0, 1]`: `-c - log(n!)`.
pub fn block_log_prior(block: &BnsVolBlock, p: &BnsParams) -> f64 {
    let c = p.rate_extent(block.delta);
    let inside = block
        .a
        .iter()
        .zip(&block.r_times)
        .all(|(&a, &r)| a > 0.0 && a <= c && (0.0..=1.0).contains(&r));
    if !inside || block.a.len() != block.r_times.len() {
        return f64::NEG_INFINITY;
    }
    let log_fact: f64 = (2..=block.n()).map(|k| (k as f64).ln()).sum();
    -c - log_fact
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    fn params() -> BnsParams {
        BnsParams::new(0.07, 1.0, 0.5, 1.0).unwrap()
    }

    #[test]
    fn no_jump_recursion() {
        let p = params();
        let prev = VolState::initial(0.8);
        let out = bns_advance_vol(&prev, &BnsVolBlock::empty(1.0), &p).unwrap();
        let d = (-1.0f64).exp();
        assert!((out.sigma_bar - 0.8 * d).abs() < 1e-15);
        assert!((out.sigma_tilde - 0.8 * (1.0 - d)).abs() < 1e-15);
    }

    #[test]
    fn zero_magnitude_jump() {
        let p = params();
        let block = BnsVolBlock {
            a: vec![0.5],
            r_times: vec![0.3],
            delta: 1.0,
        };
        let out = bns_advance_vol(&VolState::initial(0.0), &block, &p).unwrap();
        assert_eq!(out.sigma_bar, 0.0);
        assert_eq!(out.sigma_tilde, 0.0);
    }

    #[test]
    fn single_point_hand_evaluation() {
        // lambda = 1, nu = 0.5, dt = 1 so c = 0.5; point (0.25, 0.5); sigma_bar_prev = 0.5.
        let p = BnsParams::new(0.0, 1.0, 0.5, 1.0).unwrap();
        let block = BnsVolBlock {
            a: vec![0.25],
            r_times: vec![0.5],
            delta: 1.0,
        };
        let ln2 = 2f64.ln();
        let g1 = (-1.0f64).exp() * ln2 * 0.5f64.exp();
        let g2 = ln2;
        let sb = (-1.0f64).exp() * 0.5 + g1;
        let st = g2 - sb + 0.5;
        let out = bns_advance_vol(&VolState::initial(0.5), &block, &p).unwrap();
        assert!((out.sigma_bar - sb).abs() < 1e-12);
        assert!((out.sigma_tilde - st).abs() < 1e-12);
    }

    #[test]
    fn zero_coordinate_rejected() {
        let block = BnsVolBlock {
            a: vec![0.0],
            r_times: vec![0.1],
            delta: 1.0,
        };
        assert!(bns_advance_vol(&VolState::initial(0.1), &block, &params()).is_err());
    }

    #[test]
    fn sampled_blocks_are_valid() {
        let p = params();
        let mut rng = stream(2, 0, 0, Domain::Test);
        for _ in 0..10_000 {
            let b = bns_sample_vol_block(&p, 1.0, &mut rng);
            b.validate(&p).unwrap();
        }
    }

    #[test]
    fn logprice_density_examples() {
        let v = 0.3;
        let at_mean = bns_logprice_log_transition(1.07, 1.0, v, 0.07, 1.0).unwrap();
        assert!((at_mean + 0.5 * (2.0 * std::f64::consts::PI * v).ln()).abs() < 1e-14);
        let up = bns_logprice_log_transition(1.07 + v.sqrt(), 1.0, v, 0.07, 1.0).unwrap();
        let down = bns_logprice_log_transition(1.07 - v.sqrt(), 1.0, v, 0.07, 1.0).unwrap();
        assert!((up - down).abs() < 1e-14);
        assert!(bns_logprice_log_transition(1.0, 1.0, 0.0, 0.07, 1.0).is_err());
    }

    #[test]
    fn shifted_lognormal_is_change_of_variables() {
        let (nu_i, nu_p, nu_p2, st, mu, dt) = (4.2, 2.5, 1.0, 0.4, 0.07, 1.0);
        let direct = shifted_lognormal_logpdf(nu_i, nu_p, nu_p2, st, mu, dt).unwrap();
        let y = (nu_i - nu_p).ln();
        let via_y = bns_logprice_log_transition(y, (nu_p - nu_p2).ln(), st, mu, dt).unwrap() - y;
        assert!((direct - via_y).abs() < 1e-14);
        assert!(shifted_lognormal_logpdf(2.0, 2.5, 1.0, st, mu, dt).is_err());
        assert!(shifted_lognormal_logpdf(3.0, 2.5, 2.5, st, mu, dt).is_err());
    }

    #[test]
    fn prior_counts_factorial() {
        let p = params();
        let b = BnsVolBlock {
            a: vec![0.1, 0.2, 0.3],
            r_times: vec![0.1, 0.2, 0.3],
            delta: 1.0,
        };
        assert!((block_log_prior(&b, &p) - (-0.5 - 6f64.ln())).abs() < 1e-14);
        let bad = BnsVolBlock {
            a: vec![0.7],
            r_times: vec![0.1],
            delta: 1.0,
        };
        assert_eq!(block_log_prior(&bad, &p), f64::NEG_INFINITY);
    }
}
