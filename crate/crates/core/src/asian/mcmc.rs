//! Metropolis–Hastings kernels leaving the tempered Asian target invariant.
//!
//! Each kernel acts on one period `i` of a state with `n` simulated periods.
//! The potential uses the last cumulative sum, so it only enters a price move
//! at `i == n`.

use std::ops::AddAssign;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::state::{AsianProblem, AsianState};
use crate::models::bns::{advance_unchecked, sample_point};
use crate::models::VolState;

/// Proposal-ratio convention for the birth/death move on a block of `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BirthDeathRatio {
    /// `c d(n+1) / ((n+1) b(n))`: reversible for an unordered point set.
    #[default]
    Corrected,
    /// `c d(n+1) / b(n)`: omits the `1/(n+1)` factor and is not invariant.
    Verbatim,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AsianMoveStats {
    pub price_proposed: u64,
    pub price_accepted: u64,
    pub birth_death_proposed: u64,
    pub birth_death_accepted: u64,
}

impl AsianMoveStats {
    pub fn price_rate(&self) -> f64 {
        rate(self.price_accepted, self.price_proposed)
    }

    pub fn birth_death_rate(&self) -> f64 {
        rate(self.birth_death_accepted, self.birth_death_proposed)
    }
}

fn rate(a: u64, p: u64) -> f64 {
    if p == 0 {
        f64::NAN
    } else {
        a as f64 / p as f64
    }
}

impl AddAssign for AsianMoveStats {
    fn add_assign(&mut self, o: Self) {
        self.price_proposed += o.price_proposed;
        self.price_accepted += o.price_accepted;
        self.birth_death_proposed += o.birth_death_proposed;
        self.birth_death_accepted += o.birth_death_accepted;
    }
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    if log_ratio.is_nan() || log_ratio == f64::NEG_INFINITY {
        return false;
    }
    let u: f64 = rng.random();
    u.ln() < log_ratio
}

/// Redraws `nu_i` from its process law given `nu_{i-1}, nu_{i-2}`; the
/// acceptance ratio involves the downstream terms `i+1, i+2` and, at `i == n`,
/// the potential.
pub fn mcmc_price_move<R: Rng + ?Sized>(
    x: &mut AsianState,
    i: usize,
    kappa: f64,
    pb: &AsianProblem,
    rng: &mut R,
) -> bool {
    let n = x.periods();
    debug_assert!((1..=n).contains(&i));
    let (nu_prev, nu_prev2) = (x.nu[i], x.nu[i - 1]);
    let sigma_tilde = x.vols[i - 1].sigma_tilde;
    let z: f64 = StandardNormal.sample(rng);
    let step = ((nu_prev - nu_prev2).ln() + pb.params.mu * pb.dt + sigma_tilde.sqrt() * z).exp();
    let proposal = nu_prev + step;
    propose_nu(x, i, proposal, kappa, pb, rng)
}

/// MH step for a given proposed `nu_i` drawn from the period-`i` process law.
pub(crate) fn propose_nu<R: Rng + ?Sized>(
    x: &mut AsianState,
    i: usize,
    proposal: f64,
    kappa: f64,
    pb: &AsianProblem,
    rng: &mut R,
) -> bool {
    let n = x.periods();
    let current = x.nu[i + 1];
    let mut log_ratio = 0.0;
    let mut t1 = None;
    let mut t2 = None;
    if i < n {
        let new = pb.log_term(x.nu[i + 2], proposal, x.nu[i], x.vols[i].sigma_tilde);
        log_ratio += new - x.log_terms[i];
        t1 = Some(new);
    }
    if i + 1 < n {
        let new = pb.log_term(x.nu[i + 3], x.nu[i + 2], proposal, x.vols[i + 1].sigma_tilde);
        log_ratio += new - x.log_terms[i + 1];
        t2 = Some(new);
    }
    if i == n && kappa != 0.0 {
        let avg = |nu: f64| (nu - pb.params.s0) / pb.m as f64;
        log_ratio += kappa * ((avg(proposal) - pb.strike).abs().ln() - (avg(current) - pb.strike).abs().ln());
    }
    if !accept(log_ratio, rng) {
        return false;
    }
    x.nu[i + 1] = proposal;
    x.log_terms[i - 1] = pb.log_term(proposal, x.nu[i], x.nu[i - 1], x.vols[i - 1].sigma_tilde);
    if let Some(t) = t1 {
        x.log_terms[i] = t;
    }
    if let Some(t) = t2 {
        x.log_terms[i + 1] = t;
    }
    true
}

fn birth_prob(n: usize) -> f64 {
    if n == 0 {
        1.0
    } else {
        0.5
    }
}

fn death_prob(n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        0.5
    }
}

/// Log of the proposal factor for a birth taking a block from `n` to `n + 1` points.
fn log_birth_factor(c: f64, n: usize, convention: BirthDeathRatio) -> f64 {
    let base = (c * death_prob(n + 1) / birth_prob(n)).ln();
    match convention {
        BirthDeathRatio::Corrected => base - ((n + 1) as f64).ln(),
        BirthDeathRatio::Verbatim => base,
    }
}

/// Adds a uniform point to block `i` or removes a uniformly chosen one.
pub fn mcmc_birth_death<R: Rng + ?Sized>(
    x: &mut AsianState,
    i: usize,
    pb: &AsianProblem,
    convention: BirthDeathRatio,
    rng: &mut R,
) -> bool {
    let n_periods = x.periods();
    debug_assert!((1..=n_periods).contains(&i));
    let c = pb.params.rate_extent(pb.dt);
    let k = x.blocks[i - 1].n();
    let birth = rng.random::<f64>() < birth_prob(k);
    let mut block = x.blocks[i - 1].clone();
    let log_proposal = if birth {
        let (a, r) = sample_point(c, rng);
        block.a.push(a);
        block.r_times.push(r);
        log_birth_factor(c, k, convention)
    } else {
        if k == 0 {
            return false;
        }
        let j = rng.random_range(0..k);
        block.a.swap_remove(j);
        block.r_times.swap_remove(j);
        -log_birth_factor(c, k - 1, convention)
    };

    let (log_density, vols, terms) = block_change(x, i, &block, pb);
    let log_ratio = log_density + log_proposal;
    if !accept(log_ratio, rng) {
        return false;
    }
    x.blocks[i - 1] = block;
    x.vols[i - 1..].copy_from_slice(&vols);
    x.log_terms[i - 1..].copy_from_slice(&terms);
    true
}

/// Log density ratio of replacing block `i`, with the recomputed vols and terms for periods `i..=n`.
pub(crate) fn block_change(
    x: &AsianState,
    i: usize,
    block: &crate::models::BnsVolBlock,
    pb: &AsianProblem,
) -> (f64, Vec<VolState>, Vec<f64>) {
    let n_periods = x.periods();
    let mut vols: Vec<VolState> = Vec::with_capacity(n_periods + 1 - i);
    let mut terms: Vec<f64> = Vec::with_capacity(n_periods + 1 - i);
    let mut sigma_bar = x.prev_sigma_bar(i, pb.params.v0);
    let mut log_ratio = 0.0;
    for j in i..=n_periods {
        let b = if j == i { block } else { &x.blocks[j - 1] };
        let v = advance_unchecked(sigma_bar, b, &pb.params);
        let t = pb.log_term(x.nu[j + 1], x.nu[j], x.nu[j - 1], v.sigma_tilde);
        log_ratio += t - x.log_terms[j - 1];
        sigma_bar = v.sigma_bar;
        vols.push(v);
        terms.push(t);
    }
    (log_ratio, vols, terms)
}

/// `sweeps` passes over `i = 1..=n`, each applying a price move then a birth/death move.
pub fn sweep<R: Rng + ?Sized>(
    x: &mut AsianState,
    kappa: f64,
    pb: &AsianProblem,
    sweeps: usize,
    convention: BirthDeathRatio,
    rng: &mut R,
) -> AsianMoveStats {
    let mut stats = AsianMoveStats::default();
    for _ in 0..sweeps {
        for i in 1..=x.periods() {
            stats.price_proposed += 1;
            stats.price_accepted += mcmc_price_move(x, i, kappa, pb, rng) as u64;
            stats.birth_death_proposed += 1;
            stats.birth_death_accepted += mcmc_birth_death(x, i, pb, convention, rng) as u64;
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asian::asian_target_logdensity;
    use crate::models::BnsParams;
    use crate::rng::{stream, Domain};

    fn problem(c_nu: f64) -> AsianProblem {
        AsianProblem {
            params: BnsParams::new(0.07, 1.0, c_nu, 1.0).unwrap(),
            strike: 0.9,
            m: 3,
            dt: 1.0,
            rate: 0.0,
        }
    }

    #[test]
    fn identity_proposal_is_always_accepted() {
        let pb = problem(0.5);
        let mut rng = stream(3, 0, 0, Domain::Test);
        let mut x = AsianState::sample_path(&pb, 3, &mut rng);
        for i in 1..=3 {
            let before = x.clone();
            let cur = x.nu[i + 1];
            assert!(propose_nu(&mut x, i, cur, 0.7, &pb, &mut rng));
            assert_eq!(x, before);
        }
    }

    #[test]
    fn cached_terms_track_moves() {
        let pb = problem(0.5);
        let mut rng = stream(4, 0, 0, Domain::Test);
        let mut x = AsianState::sample_path(&pb, 3, &mut rng);
        for _ in 0..200 {
            sweep(&mut x, 0.4, &pb, 1, BirthDeathRatio::Corrected, &mut rng);
            x.check(&pb).unwrap();
            let fresh = AsianState::sample_path(&pb, 0, &mut rng);
            let _ = fresh;
            let mut sigma_bar = pb.params.v0;
            for i in 1..=3 {
                let v = advance_unchecked(sigma_bar, &x.blocks[i - 1], &pb.params);
                let t = pb.log_term(x.nu[i + 1], x.nu[i], x.nu[i - 1], v.sigma_tilde);
                assert!((t - x.log_terms[i - 1]).abs() < 1e-9);
                sigma_bar = v.sigma_bar;
            }
        }
    }

    #[test]
    fn empty_block_birth_ratio_matches_hand_value() {
        // lambda * nu * dt = 1, so the proposal factor is d(1)/b(0) = 1/2.
        let pb = problem(1.0);
        let mut rng = stream(5, 0, 0, Domain::Test);
        let mut x = AsianState::sample_path(&pb, 3, &mut rng);
        for b in x.blocks.iter_mut() {
            b.a.clear();
            b.r_times.clear();
        }
        let mut sigma_bar = pb.params.v0;
        for i in 1..=3 {
            let v = advance_unchecked(sigma_bar, &x.blocks[i - 1], &pb.params);
            x.vols[i - 1] = v;
            x.log_terms[i - 1] = pb.log_term(x.nu[i + 1], x.nu[i], x.nu[i - 1], v.sigma_tilde);
            sigma_bar = v.sigma_bar;
        }
        let before = asian_target_logdensity(&x, 0.0, &pb);
        let mut born = x.clone();
        born.blocks[1].a.push(0.4);
        born.blocks[1].r_times.push(0.6);
        // One point: the labelled prior factor 1/1! leaves the prior unchanged.
        let after = asian_target_logdensity(&born, 0.0, &pb);
        let (log_density, _, _) = block_change(&x, 2, &born.blocks[1], &pb);
        assert!((log_density - (after - before)).abs() < 1e-10);
        for conv in [BirthDeathRatio::Corrected, BirthDeathRatio::Verbatim] {
            let log_ratio = log_density + log_birth_factor(1.0, 0, conv);
            let expected = (after - before).exp() * 0.5;
            assert!((log_ratio.exp() - expected).abs() < 1e-10 * expected.max(1.0));
        }
    }

    #[test]
    fn birth_then_death_of_same_point_restores_state() {
        let pb = problem(0.5);
        let mut rng = stream(6, 0, 0, Domain::Test);
        let x = AsianState::sample_path(&pb, 3, &mut rng);
        let mut block = x.blocks[0].clone();
        block.a.push(0.1);
        block.r_times.push(0.2);
        block.a.swap_remove(block.a.len() - 1);
        block.r_times.swap_remove(block.r_times.len() - 1);
        assert_eq!(block, x.blocks[0]);
    }

    #[test]
    fn birth_death_keeps_blocks_valid() {
        let pb = problem(0.5);
        let mut rng = stream(7, 0, 0, Domain::Test);
        let mut x = AsianState::sample_path(&pb, 3, &mut rng);
        for _ in 0..500 {
            for i in 1..=3 {
                mcmc_birth_death(&mut x, i, &pb, BirthDeathRatio::Corrected, &mut rng);
            }
        }
        x.check(&pb).unwrap();
    }
}
