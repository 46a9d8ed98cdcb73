//! SMC sampler on a fixed state space.
//!
//! The backward kernel is the time reversal of the forward MCMC kernel, so
//! the incremental weight at step `n` is `pi_n(x) / pi_{n-1}(x)` evaluated
//! at the particle before it moves. Weights therefore never depend on
//! whether a mutation was accepted.

use std::ops::AddAssign;

use rayon::prelude::*;

use super::cloud::ParticleCloud;
use super::resample::{resample, ResampleConfig};
use super::sequential::RunTrace;
use super::zest::ZEstimatorState;
use crate::error::{invalid, Result};
use crate::rng::{stream, Domain, StreamRng};

/// Targets `pi_0, ..., pi_p` known up to constants, and `pi_n`-invariant kernels `K_1..K_p`.
pub trait SamplerTargets: Sync {
    type State: Clone + Send + Sync;
    type MoveStats: Default + Clone + Send + AddAssign;

    /// Number of tempering steps `p`.
    fn n_targets(&self) -> usize;

    fn log_target(&self, n: usize, x: &Self::State) -> f64;

    fn log_incremental_weight(&self, n: usize, x: &Self::State) -> f64 {
        let num = self.log_target(n, x);
        let den = self.log_target(n - 1, x);
        if num == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            num - den
        }
    }

    /// Applies `K_n` in place.
    fn mutate(&self, n: usize, x: &mut Self::State, rng: &mut StreamRng) -> Self::MoveStats;
}

#[derive(Debug, Clone)]
pub struct SamplerOutput<S, T> {
    pub cloud: ParticleCloud<S>,
    pub z: ZEstimatorState,
    pub trace: RunTrace,
    pub stats: T,
}

/// Reweight, resample if `ESS < threshold`, then mutate; for `n = 1..=p`.
///
/// `z` continues the normalizing-constant estimate of whatever produced the
/// incoming cloud; pass a fresh state to estimate `Z_p / Z_0` alone.
pub fn smc_sampler_run<T: SamplerTargets>(
    targets: &T,
    initial: ParticleCloud<T::State>,
    mut z: ZEstimatorState,
    seed: u64,
    cfg: &ResampleConfig,
) -> Result<SamplerOutput<T::State, T::MoveStats>> {
    initial.validate()?;
    cfg.validate(initial.len())?;
    if z.epoch_log_products.len() != initial.len() {
        return invalid("normalizing-constant state does not match the cloud size");
    }
    let mut cloud = initial;
    let start = cloud.step_index;
    let mut trace = RunTrace::default();
    let mut stats = T::MoveStats::default();

    for n in 1..=targets.n_targets() {
        let incr: Vec<f64> = cloud
            .states
            .par_iter()
            .map(|x| targets.log_incremental_weight(n, x))
            .collect();
        for (lw, w) in cloud.log_weights.iter_mut().zip(&incr) {
            *lw += w;
        }
        z.accumulate(&incr);
        cloud.step_index = start + n;
        cloud.ancestors = (0..cloud.len()).collect();
        let ess = cloud.ess()?;
        trace.ess.push(ess);
        if ess < cfg.ess_threshold {
            let mut rng = stream(seed, n as u64, 0, Domain::SamplerResample);
            z.close_epoch();
            cloud = resample(&cloud, cfg.scheme, &mut rng)?;
            trace.resample_steps.push(n);
        }
        let step_stats = cloud
            .states
            .par_iter_mut()
            .enumerate()
            .map(|(i, x)| {
                let mut rng = stream(seed, n as u64, i as u64, Domain::Mutate);
                targets.mutate(n, x, &mut rng)
            })
            .reduce(T::MoveStats::default, |mut a, b| {
                a += b;
                a
            });
        stats += step_stats;
    }
    Ok(SamplerOutput { cloud, z, trace, stats })
}
