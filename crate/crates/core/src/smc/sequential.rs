//! Sequential importance sampling, with and without resampling.

use rayon::prelude::*;

use super::cloud::ParticleCloud;
use super::resample::{resample, ResampleConfig};
use super::zest::ZEstimatorState;
use crate::error::{invalid, Result};
use crate::rng::{stream, Domain, StreamRng};

/// Whether an incremental weight is exact or an unbiased random estimate of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    Deterministic,
    /// `E[weight | prev, next]` over the auxiliary randomness equals the exact weight.
    Randomized,
}

/// A path-space model driven by SIS/SIR: initial law, proposal kernels
/// and incremental weights, all indexed by step `n >= 1`.
///
/// Weights are returned on the log scale; `-inf` kills a particle.
pub trait SequentialModel: Sync {
    type State: Clone + Send + Sync;

    fn weight_kind(&self) -> WeightKind {
        WeightKind::Deterministic
    }

    fn sample_initial(&self, rng: &mut StreamRng) -> Self::State;

    fn initial_log_weight(&self, _x0: &Self::State, _rng: &mut StreamRng) -> f64 {
        0.0
    }

    fn propose(&self, step: usize, prev: &Self::State, rng: &mut StreamRng) -> Self::State;

    fn log_weight(&self, step: usize, prev: &Self::State, next: &Self::State, rng: &mut StreamRng) -> f64;

    /// Proposal followed by weighting. Models override this when the two
    /// share work.
    fn propagate(&self, step: usize, prev: &Self::State, rng: &mut StreamRng) -> (Self::State, f64) {
        let next = self.propose(step, prev, rng);
        let lw = self.log_weight(step, prev, &next, rng);
        (next, lw)
    }
}

/// ESS per step (measured after weighting, before any resampling) and the
/// steps at which the cloud was resampled.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct RunTrace {
    pub ess: Vec<f64>,
    pub resample_steps: Vec<usize>,
}

impl RunTrace {
    pub fn resample_count(&self) -> usize {
        self.resample_steps.len()
    }

    pub fn final_ess(&self) -> f64 {
        self.ess.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone)]
pub struct SmcOutput<S> {
    pub cloud: ParticleCloud<S>,
    pub z: ZEstimatorState,
    pub trace: RunTrace,
}

/// Plain SIS: no resampling at any step.
pub fn sis_run<M: SequentialModel>(
    model: &M,
    n_steps: usize,
    n_particles: usize,
    seed: u64,
) -> Result<SmcOutput<M::State>> {
    run(model, n_steps, n_particles, seed, None)
}

/// SIR: resample whenever the ESS falls strictly below the threshold.
///
/// The final step is never resampled; estimates are read off the weighted cloud.
pub fn sir_run<M: SequentialModel>(
    model: &M,
    n_steps: usize,
    n_particles: usize,
    seed: u64,
    cfg: &ResampleConfig,
) -> Result<SmcOutput<M::State>> {
    cfg.validate(n_particles)?;
    run(model, n_steps, n_particles, seed, Some(cfg))
}

fn run<M: SequentialModel>(
    model: &M,
    n_steps: usize,
    n_particles: usize,
    seed: u64,
    cfg: Option<&ResampleConfig>,
) -> Result<SmcOutput<M::State>> {
    if n_particles == 0 {
        return invalid("need at least one particle");
    }
    let init: Vec<(M::State, f64)> = (0..n_particles)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, 0, i as u64, Domain::Initial);
            let x = model.sample_initial(&mut rng);
            let lw = model.initial_log_weight(&x, &mut rng);
            (x, lw)
        })
        .collect();
    let (states, log_weights): (Vec<_>, Vec<_>) = init.into_iter().unzip();
    let mut z = ZEstimatorState::new(n_particles);
    z.accumulate(&log_weights);
    let mut cloud = ParticleCloud {
        states,
        log_weights,
        ancestors: (0..n_particles).collect(),
        step_index: 0,
    };
    let mut trace = RunTrace::default();

    for n in 0..=n_steps {
        if n > 0 {
            let moved: Vec<(M::State, f64)> = cloud
                .states
                .par_iter()
                .enumerate()
                .map(|(i, prev)| {
                    let mut rng = stream(seed, n as u64, i as u64, Domain::Propagate);
                    model.propagate(n, prev, &mut rng)
                })
                .collect();
            let (states, incr): (Vec<_>, Vec<_>) = moved.into_iter().unzip();
            for (lw, w) in cloud.log_weights.iter_mut().zip(&incr) {
                *lw += w;
            }
            z.accumulate(&incr);
            cloud.states = states;
            cloud.ancestors = (0..n_particles).collect();
            cloud.step_index = n;
        }
        let ess = cloud.ess()?;
        trace.ess.push(ess);
        if let Some(cfg) = cfg {
            if n < n_steps && ess < cfg.ess_threshold {
                let mut rng = stream(seed, n as u64, 0, Domain::Resample);
                z.close_epoch();
                cloud = resample(&cloud, cfg.scheme, &mut rng)?;
                trace.resample_steps.push(n);
            }
        }
    }
    Ok(SmcOutput { cloud, z, trace })
}
