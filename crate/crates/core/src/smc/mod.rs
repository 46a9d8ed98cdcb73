//! Generic particle machinery: weights, ESS, resampling, SIS/SIR and the
//! fixed-space SMC sampler.

mod cloud;
mod resample;
mod sampler;
mod sequential;
mod weights;
mod zest;

pub use cloud::ParticleCloud;
pub use resample::{
    multinomial_indices, offspring_counts, resample, resample_indices, systematic_indices, ResampleConfig,
    ResampleScheme,
};
pub use sampler::{smc_sampler_run, SamplerOutput, SamplerTargets};
pub use sequential::{sir_run, sis_run, RunTrace, SequentialModel, SmcOutput, WeightKind};
pub use weights::{ess, log_sum_exp, normalize_weights};
pub use zest::{estimate_z, ZEstimatorState};
