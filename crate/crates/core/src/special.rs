//! Normal-distribution special functions and a lower-truncated normal sampler.

use rand::{Rng, RngCore};
use rand_distr::{Exp1, StandardNormal};
#[allow(unused_imports)]
use num_traits::Float;

/// `ln √(2π)`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn ln_std_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Upper tail `P(X > a)` of the standard normal.
pub fn std_normal_sf(a: f64) -> f64 {
    0.5 * libm::erfc(a / core::f64::consts::SQRT_2)
}

/// `ln P(X > a)` for the standard normal, accurate in both tails.
pub fn ln_std_normal_sf(a: f64) -> f64 {
    if a < -1.0 {
        libm::log1p(-std_normal_sf(-a))
    } else if a < 30.0 {
        std_normal_sf(a).ln()
    } else {
        // asymptotic Mills ratio series, error below 1e-13 relative here
        let a2 = a * a;
        let series = 1.0 - 1.0 / a2 + 3.0 / (a2 * a2) - 15.0 / (a2 * a2 * a2);
        ln_std_normal_pdf(a) - a.ln() + series.ln()
    }
}

/// Inverse Mills ratio `φ(a) / P(X > a)`.
pub fn inverse_mills(a: f64) -> f64 {
    (ln_std_normal_pdf(a) - ln_std_normal_sf(a)).exp()
}

/// Raw moments `E[Xᵏ | X > a]`, `k = 1..=4`, of a standard normal truncated
/// from below at `a`.
pub fn lower_truncated_moments(a: f64) -> [f64; 4] {
    let lambda = inverse_mills(a);
    let m1 = lambda;
    let m2 = 1.0 + a * lambda;
    let m3 = 2.0 * m1 + a * a * lambda;
    let m4 = 3.0 * m2 + a * a * a * lambda;
    [m1, m2, m3, m4]
}

/// Draws `X ~ N(0, 1)` conditioned on `X > a`.
///
/// Plain rejection for `a ≤ 0` (acceptance at least one half), otherwise
/// Robert's translated-exponential rejection sampler with the optimal rate.
pub fn sample_lower_truncated_std_normal(a: f64, rng: &mut dyn RngCore) -> f64 {
    if a <= 0.0 {
        loop {
            let x: f64 = rng.sample(StandardNormal);
            if x > a {
                return x;
            }
        }
    }
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = rng.sample(Exp1);
        let x = a + e / rate;
        let u: f64 = rng.random();
        let d = x - rate;
        if u.ln() <= -0.5 * d * d {
            return x;
        }
    }
}

/// Log density of `N(mean, sd²)` truncated from below at `lower`.
pub fn ln_lower_truncated_normal_pdf(z: f64, mean: f64, sd: f64, lower: f64) -> f64 {
    if z <= lower {
        return f64::NEG_INFINITY;
    }
    let r = (z - mean) / sd;
    ln_std_normal_pdf(r) - sd.ln() - ln_std_normal_sf((lower - mean) / sd)
}

/// `ln(eᵃ + eᵇ)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + libm::log1p((-(a - b).abs()).exp())
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
