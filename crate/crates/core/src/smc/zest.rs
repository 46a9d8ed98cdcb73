use super::weights::log_sum_exp;
use crate::error::{Result, SmcError};

/// Running normalizing-constant estimate.
///
/// Between resampling times each particle accumulates the log-product of its
/// incremental weights. Resampling closes the epoch, recording
/// `log((1/N) sum_i prod_i)`, and restarts every product at 1. The estimate
/// is the product of all closed-epoch means with the open epoch's mean.
/// The time-0 weight belongs to the first epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct ZEstimatorState {
    pub epoch_log_products: Vec<f64>,
    pub completed_epoch_log_means: Vec<f64>,
}

impl ZEstimatorState {
    pub fn new(n_particles: usize) -> Self {
        Self {
            epoch_log_products: vec![0.0; n_particles],
            completed_epoch_log_means: Vec::new(),
        }
    }

    pub fn accumulate(&mut self, log_increments: &[f64]) {
        debug_assert_eq!(log_increments.len(), self.epoch_log_products.len());
        for (p, &w) in self.epoch_log_products.iter_mut().zip(log_increments) {
            *p += w;
        }
    }

    fn open_epoch_log_mean(&self) -> f64 {
        log_sum_exp(&self.epoch_log_products) - (self.epoch_log_products.len() as f64).ln()
    }

    /// Closes the current epoch; called immediately before resampling.
    pub fn close_epoch(&mut self) {
        let m = self.open_epoch_log_mean();
        self.completed_epoch_log_means.push(m);
        self.epoch_log_products.iter_mut().for_each(|p| *p = 0.0);
    }

    pub fn log_estimate(&self) -> Result<f64> {
        if self.epoch_log_products.is_empty() {
            return Err(SmcError::Domain("estimator holds no particles".into()));
        }
        let open = self.open_epoch_log_mean();
        if open == f64::NEG_INFINITY {
            return Err(SmcError::DegenerateCloud {
                step: self.completed_epoch_log_means.len(),
            });
        }
        Ok(self.completed_epoch_log_means.iter().sum::<f64>() + open)
    }

    pub fn n_epochs_closed(&self) -> usize {
        self.completed_epoch_log_means.len()
    }
}

/// `Z_hat` on the linear scale.
pub fn estimate_z(state: &ZEstimatorState) -> Result<f64> {
    state.log_estimate().map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_epoch_constant_products() {
        let mut z = ZEstimatorState::new(5);
        z.accumulate(&[3f64.ln(); 5]);
        assert!((estimate_z(&z).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn epochs_factorize() {
        let mut z = ZEstimatorState::new(4);
        z.accumulate(&[2f64.ln(); 4]);
        z.close_epoch();
        z.accumulate(&[5f64.ln(); 4]);
        assert!((estimate_z(&z).unwrap() - 10.0).abs() < 1e-13);
        assert_eq!(z.n_epochs_closed(), 1);
    }

    #[test]
    fn open_epoch_after_close_contributes_one() {
        let mut z = ZEstimatorState::new(3);
        z.accumulate(&[0.0, 1.0, 2.0]);
        let before = z.log_estimate().unwrap();
        z.close_epoch();
        assert!((z.log_estimate().unwrap() - before).abs() < 1e-15);
    }

    #[test]
    fn all_dead_is_degenerate() {
        let mut z = ZEstimatorState::new(2);
        z.accumulate(&[f64::NEG_INFINITY; 2]);
        assert!(matches!(estimate_z(&z), Err(SmcError::DegenerateCloud { .. })));
    }
}
