use super::weights::{ess_at, normalize_weights_at};
use crate::error::{Result, SmcError};

/// `N` weighted particles together with their ancestry.
///
/// Log-weights are unnormalized; `-inf` marks a dead particle.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud<S> {
    pub states: Vec<S>,
    pub log_weights: Vec<f64>,
    pub ancestors: Vec<usize>,
    pub step_index: usize,
}

impl<S> ParticleCloud<S> {
    /// Equally weighted cloud, each particle its own ancestor.
    pub fn uniform(states: Vec<S>, step_index: usize) -> Self {
        let n = states.len();
        let lw = -(n as f64).ln();
        Self {
            log_weights: vec![lw; n],
            ancestors: (0..n).collect(),
            states,
            step_index,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.states.len();
        if n == 0 || self.log_weights.len() != n || self.ancestors.len() != n {
            return Err(SmcError::Domain(format!(
                "cloud lengths differ or are empty: {} states, {} weights, {} ancestors",
                n,
                self.log_weights.len(),
                self.ancestors.len()
            )));
        }
        normalize_weights_at(&self.log_weights, self.step_index).map(|_| ())
    }

    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        normalize_weights_at(&self.log_weights, self.step_index).map(|(w, _)| w)
    }

    pub fn ess(&self) -> Result<f64> {
        ess_at(&self.log_weights, self.step_index)
    }

    /// Self-normalized estimate of `E[f]` under the weighted empirical measure.
    pub fn expectation(&self, f: impl Fn(&S) -> f64) -> Result<f64> {
        let w = self.normalized_weights()?;
        Ok(w.iter()
            .zip(&self.states)
            .filter(|(&w, _)| w > 0.0)
            .map(|(&w, x)| w * f(x))
            .sum())
    }
}
