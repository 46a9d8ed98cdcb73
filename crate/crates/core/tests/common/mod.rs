//! Independent oracles: quadrature, enumeration and goodness-of-fit helpers.
#![allow(dead_code)]

use smcprice_core::rng::StreamRng;
use smcprice_core::smc::{SequentialModel, WeightKind};

use rand::Rng;

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E[f(Z)]` for `Z ~ N(0, 1)` by Simpson on `[-12, 12]`.
pub fn normal_expectation(f: impl Fn(f64) -> f64) -> f64 {
    simpson(|z| f(z) * std_normal_pdf(z), -12.0, 12.0, 6000)
}

/// `E[f(Z1, Z2)]` for independent standard normals.
pub fn normal_expectation2(f: impl Fn(f64, f64) -> f64, n: usize) -> f64 {
    simpson(
        |z1| std_normal_pdf(z1) * simpson(|z2| f(z1, z2) * std_normal_pdf(z2), -10.0, 10.0, n),
        -10.0,
        10.0,
        n,
    )
}

/// Kolmogorov–Smirnov statistic of `xs` against `cdf`.
pub fn ks_statistic(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// KS critical value at level 0.001.
pub fn ks_critical(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

/// Two-state chain with initial law `ETA`, transition `P` and potential
/// `g(x) = 1 + x`, proposed uniformly. The weight optionally carries an
/// independent `Exp(1)` factor, which keeps it unbiased.
pub struct ToyChain {
    pub randomized: bool,
}

pub const ETA: [f64; 2] = [0.6, 0.4];
pub const P: [[f64; 2]; 2] = [[0.7, 0.3], [0.2, 0.8]];

pub fn g(x: u8) -> f64 {
    1.0 + x as f64
}

impl SequentialModel for ToyChain {
    type State = Vec<u8>;

    fn weight_kind(&self) -> WeightKind {
        if self.randomized {
            WeightKind::Randomized
        } else {
            WeightKind::Deterministic
        }
    }

    fn sample_initial(&self, rng: &mut StreamRng) -> Vec<u8> {
        vec![rng.random_range(0..2u8)]
    }

    fn initial_log_weight(&self, x0: &Vec<u8>, _rng: &mut StreamRng) -> f64 {
        (ETA[x0[0] as usize] / 0.5).ln()
    }

    fn propose(&self, _step: usize, prev: &Vec<u8>, rng: &mut StreamRng) -> Vec<u8> {
        let mut x = prev.clone();
        x.push(rng.random_range(0..2u8));
        x
    }

    fn log_weight(&self, _step: usize, prev: &Vec<u8>, next: &Vec<u8>, rng: &mut StreamRng) -> f64 {
        let a = *prev.last().unwrap() as usize;
        let b = *next.last().unwrap();
        let mut w = P[a][b as usize] * g(b) / 0.5;
        if self.randomized {
            let u: f64 = rng.random();
            w *= -(1.0 - u).ln();
        }
        w.ln()
    }
}

/// Every path of length `m + 1` with its unnormalized target mass.
pub fn toy_paths(m: usize) -> Vec<(Vec<u8>, f64)> {
    let mut out = Vec::new();
    for code in 0..(1usize << (m + 1)) {
        let path: Vec<u8> = (0..=m).map(|k| ((code >> k) & 1) as u8).collect();
        let mut w = ETA[path[0] as usize];
        for k in 1..=m {
            w *= P[path[k - 1] as usize][path[k] as usize] * g(path[k]);
        }
        out.push((path, w));
    }
    out
}

pub fn toy_z(m: usize) -> f64 {
    toy_paths(m).iter().map(|p| p.1).sum()
}

/// Posterior expectation of `h` over enumerated paths.
pub fn toy_posterior(m: usize, h: impl Fn(&[u8]) -> f64) -> f64 {
    let paths = toy_paths(m);
    let z: f64 = paths.iter().map(|p| p.1).sum();
    paths.iter().map(|(x, w)| w * h(x)).sum::<f64>() / z
}

/// Two-date discretely monitored down-and-out call under Black–Scholes with
/// lower barrier `h <= k`, by nested quadrature in the Gaussian increments.
pub fn barrier_two_date(s0: f64, k: f64, h: f64, r: f64, sigma: f64, dt: f64) -> f64 {
    let drift = (r - 0.5 * sigma * sigma) * dt;
    let sd = sigma * dt.sqrt();
    let z_h = ((h / s0).ln() - drift) / sd;
    let inner = |s1: f64| {
        let z_k = ((k / s1).ln() - drift) / sd;
        simpson(
            |z2| (s1 * (drift + sd * z2).exp() - k).max(0.0) * std_normal_pdf(z2),
            z_k,
            z_k.max(0.0) + 12.0,
            3000,
        )
    };
    let value = simpson(
        |z1| inner(s0 * (drift + sd * z1).exp()) * std_normal_pdf(z1),
        z_h,
        z_h.max(0.0) + 12.0,
        3000,
    );
    (-r * 2.0 * dt).exp() * value
}

/// Two-date arithmetic Asian call with deterministic log-return variances
/// `v1, v2`, log drift `mu` per period and no drift correction:
/// `S_i = S_{i-1} exp(mu + sqrt(v_i) Z_i)`, payoff `((S_1 + S_2)/2 - K)_+`.
pub fn asian_two_date(s0: f64, k: f64, mu: f64, v1: f64, v2: f64) -> f64 {
    normal_expectation2(
        |z1, z2| {
            let s1 = s0 * (mu + v1.sqrt() * z1).exp();
            let s2 = s1 * (mu + v2.sqrt() * z2).exp();
            (0.5 * (s1 + s2) - k).max(0.0)
        },
        1600,
    )
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
