//! Repetition statistics shared by the pricers and the experiment harness.

use serde::{Deserialize, Serialize};

/// Mean and sample standard deviation across repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, sd, n }
    }

    pub fn variance(&self) -> f64 {
        self.sd * self.sd
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        self.sd / (self.n as f64).sqrt()
    }

    /// Half-width of the `mean ± 2 SD` band across repetitions.
    pub fn two_sd(&self) -> f64 {
        2.0 * self.sd
    }
}

/// One repetition's headline numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRow {
    pub rep: usize,
    pub seed: u64,
    pub estimate: f64,
    pub ess_final: f64,
    pub resample_epochs: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub two_sd: f64,
    pub variance: f64,
    pub mean_ess_final: f64,
    pub reps: usize,
}

/// Per-repetition rows, per-step ESS traces and their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<RepRow>,
    pub ess_traces: Vec<Vec<f64>>,
    pub aggregate: Aggregate,
}

impl RunReport {
    pub fn new(rows: Vec<RepRow>, ess_traces: Vec<Vec<f64>>) -> Self {
        let aggregate = Self::aggregate_of(&rows);
        Self {
            rows,
            ess_traces,
            aggregate,
        }
    }

    pub fn aggregate_of(rows: &[RepRow]) -> Aggregate {
        let est: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
        let e = Estimate::from_samples(&est);
        let mean_ess_final = rows.iter().map(|r| r.ess_final).sum::<f64>() / rows.len() as f64;
        Aggregate {
            mean: e.mean,
            two_sd: e.two_sd(),
            variance: e.variance(),
            mean_ess_final,
            reps: rows.len(),
        }
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.estimate).collect()
    }

    pub fn estimate(&self) -> Estimate {
        Estimate::from_samples(&self.estimates())
    }
}
