//! Sequential Monte Carlo engine for option pricing and sensitivities.
//!
//! * [`smc`] holds the generic particle machinery.
//! * [`models`] provides Black–Scholes and BNS gamma-OU transition laws.
//! * [`barrier`], [`asian`] and [`greeks`] are the pricers built on top.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asian;
pub mod barrier;
pub mod error;
pub mod greeks;
pub mod models;
pub mod normal;
pub mod report;
pub mod rng;
pub mod smc;

pub use error::{Result, SmcError};
