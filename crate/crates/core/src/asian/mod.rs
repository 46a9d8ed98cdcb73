//! Fixed-strike arithmetic Asian call under the BNS model.
//!
//! Prices are carried as cumulative sums `nu_i = S_0 + S_1 + ... + S_i`, so
//! the average of the monitored prices is `(nu_m - S_0) / m` and each
//! `nu_i - nu_{i-1}` has a lognormal law located at `ln(nu_{i-1} - nu_{i-2})`.
//! Pricing runs a tempered SIR on the growing path followed by an SMC
//! sampler that raises the temperature of `|A - K|` to one.

mod baseline;
mod mcmc;
mod smc;
mod state;

pub use baseline::{asian_is_baseline, IsOptions, IsRun};
pub use mcmc::{mcmc_birth_death, mcmc_price_move, sweep, AsianMoveStats, BirthDeathRatio};
pub use smc::{
    asian_price_estimate, asian_smc_price, asian_stage1_sir, asian_stage2_sampler, asian_tempered_estimate, AsianRun,
    AsianSmcConfig, AsianTemperSchedule,
};
pub use state::{asian_target_logdensity, AsianProblem, AsianState};
