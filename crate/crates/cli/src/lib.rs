//! Experiment harness: configuration, repetition runners and report files.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod selftest;

pub use error::{CliError, CliResult};
