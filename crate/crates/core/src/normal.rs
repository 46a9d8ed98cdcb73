//! Standard normal helpers used by the transition densities.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        1.0
    } else if z == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-z * FRAC_1_SQRT_2)
    }
}

/// Upper tail `1 - cdf(z)` without cancellation.
pub fn sf(z: f64) -> f64 {
    cdf(-z)
}

pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        let x = -SQRT_2 * erfc_inv(2.0 * p);
        // One Newton step against the accurate cdf; 1 - p is exact for p >= 0.5.
        let resid = if p < 0.5 { cdf(x) - p } else { (1.0 - p) - sf(x) };
        let dens = pdf(x);
        if dens > 0.0 {
            x - resid / dens
        } else {
            x
        }
    }
}

pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Log-density of `N(mean, variance)` at `x`.
pub fn log_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * (d * d / variance) - 0.5 * variance.ln() - LN_SQRT_2PI
}

/// `P(za <= Z <= zb)`, evaluated on whichever tail keeps precision.
pub fn interval_prob(za: f64, zb: f64) -> f64 {
    if zb <= za {
        return 0.0;
    }
    let p = if za > 0.0 { sf(za) - sf(zb) } else { cdf(zb) - cdf(za) };
    p.max(0.0)
}

/// Maps `u` in (0,1) to a draw of `Z` truncated to `[za, zb]`.
pub fn truncated_quantile(za: f64, zb: f64, u: f64) -> f64 {
    let z = if za > 0.0 {
        let hi = sf(za);
        let lo = sf(zb);
        -quantile(lo + u * (hi - lo))
    } else {
        let lo = cdf(za);
        let hi = cdf(zb);
        quantile(lo + u * (hi - lo))
    };
    z.clamp(za, zb)
}
