//! Normal variates restricted to an interval.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Error, Result};
use crate::normal;

/// Beyond this many standard deviations inversion loses accuracy and the
/// exponential-proposal sampler takes over.
const TAIL: f64 = 5.0;

/// Standard normal on `(a, b)` with `a >= TAIL`.
fn upper_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b - a < 1.0 / a {
        // Short interval: uniform proposal, accept with exp((a^2 - z^2) / 2).
        loop {
            let z = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>().ln() < 0.5 * (a * a - z * z) {
                return z;
            }
        }
    }
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let z = a + e / lambda;
        if z > b {
            continue;
        }
        let d = z - lambda;
        if rng.random::<f64>().ln() < -0.5 * d * d {
            return z;
        }
    }
}

/// Standard normal on `(a, b)`.
fn standard<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if !(a < b) {
        return Err(Error::EmptyTruncation { lo: a, hi: b });
    }
    if a >= TAIL {
        return Ok(upper_tail(a, b, rng));
    }
    if b <= -TAIL {
        return Ok(-upper_tail(-b, -a, rng));
    }
    let u: f64 = rng.random();
    if a > 0.0 {
        // Right of the mode use upper-tail probabilities.
        let (qa, qb) = (normal::sf(a), normal::sf(b));
        let mass = qa - qb;
        if !(mass > 1e-300) {
            return Err(Error::EmptyTruncation { lo: a, hi: b });
        }
        let z = -normal::inv_cdf(qb + u * mass);
        Ok(z.clamp(a, b))
    } else {
        let (pa, pb) = (normal::cdf(a), normal::cdf(b));
        let mass = pb - pa;
        if !(mass > 1e-300) {
            return Err(Error::EmptyTruncation { lo: a, hi: b });
        }
        let z = normal::inv_cdf(pa + u * mass);
        Ok(z.clamp(a, b))
    }
}

/// A draw from `N(mean, sd^2)` conditioned on `(lo, hi)`. Either bound may be
/// infinite.
pub fn truncated_normal<R: Rng + ?Sized>(mean: f64, sd: f64, lo: f64, hi: f64, rng: &mut R) -> Result<f64> {
    if !(sd > 0.0) || !(lo < hi) || mean.is_nan() {
        return Err(invalid(format!("truncated normal needs sd > 0 and lo < hi, got sd={sd}, ({lo}, {hi})")));
    }
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    Ok(mean + sd * standard(a, b, rng)?)
}
