//! Variance ratio of two repetition sets with a delete-one jackknife error.

use serde::Serialize;

use crate::error::{config_err, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceRatio {
    /// `Var(b) / Var(a)`.
    pub ratio: f64,
    /// Jackknife standard error, from both samples combined in quadrature.
    pub se: f64,
}

fn sample_var(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Jackknife variance of `stat(xs without i)` over the deletions `i`.
fn jackknife_var(xs: &[f64], stat: impl Fn(&[f64]) -> f64) -> f64 {
    let n = xs.len();
    if n < 3 {
        return f64::NAN;
    }
    let loo: Vec<f64> = (0..n)
        .map(|i| {
            let rest: Vec<f64> = xs
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &x)| x)
                .collect();
            stat(&rest)
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / n as f64;
    (n - 1) as f64 / n as f64 * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
}

pub fn compare_variance(a: &[f64], b: &[f64]) -> CliResult<VarianceRatio> {
    if a.len() < 2 || b.len() < 2 {
        return config_err(format!(
            "need at least 2 repetitions per report, got {} and {}",
            a.len(),
            b.len()
        ));
    }
    let (va, vb) = (sample_var(a), sample_var(b));
    if !(va > 0.0) {
        return config_err("first report has zero variance");
    }
    let ja = jackknife_var(a, |xs| vb / sample_var(xs));
    let jb = jackknife_var(b, |xs| sample_var(xs) / va);
    Ok(VarianceRatio {
        ratio: vb / va,
        se: (ja + jb).sqrt(),
    })
}
