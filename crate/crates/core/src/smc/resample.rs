use rand::distr::{Distribution, StandardUniform};
use rand::Rng;

use super::cloud::ParticleCloud;
use super::weights::max_log_weight;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleScheme {
    Systematic,
    Multinomial,
}

/// When and how to resample. A step resamples iff `ESS < ess_threshold`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ResampleConfig {
    pub scheme: ResampleScheme,
    pub ess_threshold: f64,
}

impl ResampleConfig {
    pub fn systematic(ess_threshold: f64) -> Self {
        Self {
            scheme: ResampleScheme::Systematic,
            ess_threshold,
        }
    }

    /// Systematic resampling at `N/2`.
    pub fn half(n: usize) -> Self {
        Self::systematic(n as f64 / 2.0)
    }

    /// Never resample.
    pub fn disabled() -> Self {
        Self::systematic(0.0)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.ess_threshold >= 0.0 && self.ess_threshold <= n as f64) {
            return invalid(format!("ess_threshold {} outside [0, {n}]", self.ess_threshold));
        }
        Ok(())
    }
}

/// Cumulative weights scaled to total `N`, in particle order.
///
/// Scaling each unnormalized weight by `N / total` keeps equal weights at
/// exactly 1, so grid points never straddle a cumulative boundary by rounding.
fn scaled_cdf(log_weights: &[f64], step: usize) -> Result<Vec<f64>> {
    let max = max_log_weight(log_weights, step)?;
    let raw: Vec<f64> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    let scale = raw.len() as f64 / total;
    let mut acc = 0.0;
    Ok(raw
        .iter()
        .map(|&x| {
            acc += x * scale;
            acc
        })
        .collect())
}

/// Systematic selection with offset `u` in `[0,1)`: grid points `(u + k)/N`
/// matched against the weight CDF.
pub fn systematic_indices(log_weights: &[f64], u: f64, step: usize) -> Result<Vec<usize>> {
    let cdf = scaled_cdf(log_weights, step)?;
    let n = cdf.len();
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let point = u + k as f64;
        while j + 1 < n && cdf[j] <= point {
            j += 1;
        }
        out.push(j);
    }
    Ok(out)
}

/// `N` independent draws from the normalized weights.
pub fn multinomial_indices<R: Rng>(log_weights: &[f64], rng: &mut R, step: usize) -> Result<Vec<usize>> {
    let cdf = scaled_cdf(log_weights, step)?;
    let n = cdf.len();
    let mut out: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = StandardUniform.sample(rng);
            let point = u * n as f64;
            cdf.partition_point(|&c| c <= point).min(n - 1)
        })
        .collect();
    out.sort_unstable();
    Ok(out)
}

pub fn resample_indices<R: Rng>(
    log_weights: &[f64],
    scheme: ResampleScheme,
    rng: &mut R,
    step: usize,
) -> Result<Vec<usize>> {
    match scheme {
        ResampleScheme::Systematic => {
            let u: f64 = StandardUniform.sample(rng);
            systematic_indices(log_weights, u, step)
        }
        ResampleScheme::Multinomial => multinomial_indices(log_weights, rng, step),
    }
}

/// Draws `N` particles with `E[copies of i] = N w_i`; output weights are `1/N`.
pub fn resample<S: Clone, R: Rng>(
    cloud: &ParticleCloud<S>,
    scheme: ResampleScheme,
    rng: &mut R,
) -> Result<ParticleCloud<S>> {
    let idx = resample_indices(&cloud.log_weights, scheme, rng, cloud.step_index)?;
    let states = idx.iter().map(|&i| cloud.states[i].clone()).collect();
    let n = idx.len();
    Ok(ParticleCloud {
        states,
        log_weights: vec![-(n as f64).ln(); n],
        ancestors: idx,
        step_index: cloud.step_index,
    })
}

pub fn offspring_counts(indices: &[usize], n: usize) -> Vec<usize> {
    let mut counts = vec![0; n];
    for &i in indices {
        counts[i] += 1;
    }
    counts
}
