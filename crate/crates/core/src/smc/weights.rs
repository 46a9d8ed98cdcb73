//! Log-space weight arithmetic.

use crate::error::{Result, SmcError};

/// `log(sum(exp(lw)))` with max-shift. Returns `-inf` when every entry is `-inf`.
pub fn log_sum_exp(log_weights: &[f64]) -> f64 {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = log_weights.iter().map(|&lw| (lw - max).exp()).sum();
    max + sum.ln()
}

pub(crate) fn max_log_weight(log_weights: &[f64], step: usize) -> Result<f64> {
    let mut max = f64::NEG_INFINITY;
    for &lw in log_weights {
        if lw.is_nan() || lw == f64::INFINITY {
            return Err(SmcError::Domain(format!("log-weight {lw} at step {step}")));
        }
        max = max.max(lw);
    }
    if max == f64::NEG_INFINITY {
        return Err(SmcError::DegenerateCloud { step });
    }
    Ok(max)
}

/// Normalized weights and the log of the unnormalized total.
pub fn normalize_weights(log_weights: &[f64]) -> Result<(Vec<f64>, f64)> {
    normalize_weights_at(log_weights, 0)
}

pub(crate) fn normalize_weights_at(log_weights: &[f64], step: usize) -> Result<(Vec<f64>, f64)> {
    let max = max_log_weight(log_weights, step)?;
    let mut w: Vec<f64> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    Ok((w, max + total.ln()))
}

/// Effective sample size `(sum w)^2 / sum w^2`, in `[1, N]`.
pub fn ess(log_weights: &[f64]) -> Result<f64> {
    ess_at(log_weights, 0)
}

pub(crate) fn ess_at(log_weights: &[f64], step: usize) -> Result<f64> {
    let max = max_log_weight(log_weights, step)?;
    let (mut s1, mut s2) = (0.0, 0.0);
    for &lw in log_weights {
        let w = (lw - max).exp();
        s1 += w;
        s2 += w * w;
    }
    Ok((s1 * s1 / s2).clamp(1.0, log_weights.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        let (w, ls) = normalize_weights(&[2f64.ln(), 2f64.ln()]).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
        assert!((ls - 4f64.ln()).abs() < 1e-15);

        let (w, ls) = normalize_weights(&[0.0, f64::NEG_INFINITY]).unwrap();
        assert_eq!(w, vec![1.0, 0.0]);
        assert_eq!(ls, 0.0);

        let (w, ls) = normalize_weights(&[2f64.ln(), 0.0, 0.0]).unwrap();
        for (a, b) in w.iter().zip([0.5, 0.25, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((ls - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn all_neg_inf_is_degenerate() {
        let lw = [f64::NEG_INFINITY; 3];
        assert_eq!(normalize_weights(&lw), Err(SmcError::DegenerateCloud { step: 0 }));
        assert!(ess(&lw).is_err());
        assert!(normalize_weights(&[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn ess_examples() {
        assert_eq!(ess(&[0.3; 4]).unwrap(), 4.0);
        let ninf = f64::NEG_INFINITY;
        assert_eq!(ess(&[0.0, ninf, ninf, ninf]).unwrap(), 1.0);
        let e = ess(&[2f64.ln(), 0.0, 0.0]).unwrap();
        assert!((e - 16.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn survives_huge_offsets() {
        let (w, ls) = normalize_weights(&[-1000.0, -1000.0]).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
        assert!((ls - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(ess(&[800.0, 800.0, 800.0]).unwrap(), 3.0);
    }

    proptest! {
        #[test]
        fn weights_sum_to_one_and_ess_in_range(lw in prop::collection::vec(-50.0f64..50.0, 1..64)) {
            let (w, _) = normalize_weights(&lw).unwrap();
            let s: f64 = w.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            let e = ess(&lw).unwrap();
            prop_assert!(e >= 1.0 && e <= lw.len() as f64);
        }

        #[test]
        fn ess_equals_n_for_equal_weights(c in -100.0f64..100.0, n in 1usize..100) {
            let e = ess(&vec![c; n]).unwrap();
            prop_assert!((e - n as f64).abs() < 1e-9 * n as f64);
        }
    }
}
