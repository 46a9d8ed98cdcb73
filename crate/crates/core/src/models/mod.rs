//! Transition laws for the Black–Scholes and BNS gamma-OU models.

pub mod bns;
pub mod gbm;

pub use bns::{
    block_log_prior, bns_advance_vol, bns_logprice_log_transition, bns_sample_vol_block, shifted_lognormal_logpdf,
    BnsParams, BnsVolBlock, VolState,
};
pub use gbm::{
    bgk_barrier_price, black_scholes_call, black_scholes_call_delta, down_and_out_call, gbm_log_transition, gbm_sample,
    gbm_sample_conditioned, gbm_survival_prob, GbmParams, Interval, BGK_BETA,
};
