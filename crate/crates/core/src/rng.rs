//! Counter-based random streams.
//!
//! Every random draw in the engine comes from a stream keyed by
//! `(seed, step, index, domain)`. The key is used verbatim as the ChaCha
//! seed, so two distinct keys never share a stream and the value a particle
//! sees does not depend on which worker thread handles it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Separates streams that share `(seed, step, index)` but serve different purposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Initial = 1,
    Propagate = 2,
    Resample = 3,
    Mutate = 4,
    Greeks = 5,
    Baseline = 6,
    SamplerResample = 7,
    Test = 0xFFFF,
}

pub fn stream(seed: u64, step: u64, index: u64, domain: Domain) -> StreamRng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&step.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..32].copy_from_slice(&(domain as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Seed for repetition `rep` of an experiment started from `base`.
pub fn rep_seed(base: u64, rep: usize) -> u64 {
    base.wrapping_add(rep as u64)
}
