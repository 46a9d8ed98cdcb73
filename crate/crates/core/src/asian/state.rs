use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::models::bns::{advance_unchecked, shifted_lognormal_unchecked};
use crate::models::{block_log_prior, bns_sample_vol_block, BnsParams, BnsVolBlock, VolState};

/// Contract and model: `m` equally spaced monitoring dates `dt` apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsianProblem {
    pub params: BnsParams,
    pub strike: f64,
    pub m: usize,
    pub dt: f64,
    /// Discount rate; the payoff is discounted by `exp(-rate * m * dt)`.
    pub rate: f64,
}

impl AsianProblem {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.m == 0 {
            return invalid("asian option needs at least one monitoring date");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("period length {} must be positive", self.dt));
        }
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return invalid(format!("strike {} must be positive", self.strike));
        }
        if !self.rate.is_finite() {
            return invalid("discount rate must be finite");
        }
        Ok(())
    }

    pub fn maturity(&self) -> f64 {
        self.m as f64 * self.dt
    }

    pub fn discount(&self) -> f64 {
        (-self.rate * self.maturity()).exp()
    }

    /// Average over the full horizon of the prices seen so far.
    pub fn partial_average(&self, x: &AsianState) -> f64 {
        (x.nu_last() - self.params.s0) / self.m as f64
    }

    /// `kappa * ln|A - K|`, zero when `kappa == 0`.
    pub fn log_potential(&self, kappa: f64, x: &AsianState) -> f64 {
        if kappa == 0.0 {
            0.0
        } else {
            kappa * (self.partial_average(x) - self.strike).abs().ln()
        }
    }

    pub(crate) fn log_term(&self, nu: f64, nu_prev: f64, nu_prev2: f64, sigma_tilde: f64) -> f64 {
        shifted_lognormal_unchecked(nu, nu_prev, nu_prev2, sigma_tilde, self.params.mu, self.dt)
    }
}

/// Path of cumulative sums with its volatility blocks.
///
/// `nu[0] = 0`, `nu[1] = S_0`, and `nu[i + 1]` is the cumulative sum after
/// period `i`. `blocks`, `vols` and the cached log terms hold one entry per
/// simulated period.
#[derive(Debug, Clone, PartialEq)]
pub struct AsianState {
    pub nu: Vec<f64>,
    pub blocks: Vec<BnsVolBlock>,
    pub vols: Vec<VolState>,
    pub(crate) log_terms: Vec<f64>,
}

impl AsianState {
    pub fn initial(s0: f64, m: usize) -> Self {
        let mut nu = Vec::with_capacity(m + 2);
        nu.push(0.0);
        nu.push(s0);
        Self {
            nu,
            blocks: Vec::with_capacity(m),
            vols: Vec::with_capacity(m),
            log_terms: Vec::with_capacity(m),
        }
    }

    /// Number of simulated periods.
    pub fn periods(&self) -> usize {
        self.blocks.len()
    }

    /// Cumulative sum after period `i` (`i = 0` gives `S_0`).
    pub fn nu_at(&self, i: usize) -> f64 {
        self.nu[i + 1]
    }

    pub fn nu_last(&self) -> f64 {
        *self.nu.last().unwrap()
    }

    /// Price observed at the end of period `i >= 1`.
    pub fn price(&self, i: usize) -> f64 {
        self.nu[i + 1] - self.nu[i]
    }

    pub fn log_terms(&self) -> &[f64] {
        &self.log_terms
    }

    pub(crate) fn prev_sigma_bar(&self, i: usize, v0: f64) -> f64 {
        if i == 1 {
            v0
        } else {
            self.vols[i - 2].sigma_bar
        }
    }

    /// Appends one period drawn from the model.
    pub fn extend<R: Rng + ?Sized>(&mut self, pb: &AsianProblem, rng: &mut R) {
        let i = self.periods() + 1;
        let block = bns_sample_vol_block(&pb.params, pb.dt, rng);
        let vol = advance_unchecked(self.prev_sigma_bar(i, pb.params.v0), &block, &pb.params);
        let nu_prev = self.nu[i];
        let last = nu_prev - self.nu[i - 1];
        let z: f64 = StandardNormal.sample(rng);
        let nu = nu_prev + (last.ln() + pb.params.mu * pb.dt + vol.sigma_tilde.sqrt() * z).exp();
        let term = pb.log_term(nu, nu_prev, self.nu[i - 1], vol.sigma_tilde);
        self.nu.push(nu);
        self.blocks.push(block);
        self.vols.push(vol);
        self.log_terms.push(term);
    }

    pub fn sample_path<R: Rng + ?Sized>(pb: &AsianProblem, periods: usize, rng: &mut R) -> Self {
        let mut x = Self::initial(pb.params.s0, pb.m);
        for _ in 0..periods {
            x.extend(pb, rng);
        }
        x
    }

    /// Checks monotonicity and that vols and cached terms match the blocks.
    pub fn check(&self, pb: &AsianProblem) -> Result<()> {
        let n = self.periods();
        if self.nu.len() != n + 2 || self.vols.len() != n || self.log_terms.len() != n {
            return invalid("asian state has inconsistent lengths");
        }
        if self.nu[1] != pb.params.s0 || self.nu[0] != 0.0 {
            return invalid("asian state does not start at the initial price");
        }
        if self.nu.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("cumulative sums are not strictly increasing");
        }
        let mut sigma_bar = pb.params.v0;
        for i in 1..=n {
            self.blocks[i - 1].validate(&pb.params)?;
            let v = advance_unchecked(sigma_bar, &self.blocks[i - 1], &pb.params);
            let tol = 1e-12 * (1.0 + v.sigma_bar.abs());
            if (v.sigma_bar - self.vols[i - 1].sigma_bar).abs() > tol
                || (v.sigma_tilde - self.vols[i - 1].sigma_tilde).abs() > tol
            {
                return invalid(format!("volatility of period {i} does not match its block"));
            }
            sigma_bar = v.sigma_bar;
        }
        Ok(())
    }
}

/// `kappa ln|A - K| + sum_i ln phi_i + sum_i ln p(v_i)` over the simulated
/// periods, recomputed from the blocks. Ordering violations give `-inf`.
pub fn asian_target_logdensity(x: &AsianState, kappa: f64, pb: &AsianProblem) -> f64 {
    let n = x.periods();
    if x.nu.len() != n + 2 {
        return f64::NEG_INFINITY;
    }
    let mut total = pb.log_potential(kappa, x);
    let mut sigma_bar = pb.params.v0;
    for i in 1..=n {
        let block = &x.blocks[i - 1];
        let v = advance_unchecked(sigma_bar, block, &pb.params);
        total += pb.log_term(x.nu[i + 1], x.nu[i], x.nu[i - 1], v.sigma_tilde);
        total += block_log_prior(block, &pb.params);
        sigma_bar = v.sigma_bar;
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}
