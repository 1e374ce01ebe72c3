//! Bivariate standard normal distribution function.
//!
//! Uses Plackett's identity `dF/drho = phi2(h, k; rho)`, so
//! `F(h, k; rho) = Phi(h) Phi(k) + int_0^rho phi2(h, k; r) dr`, with the
//! one-dimensional integral evaluated by adaptive Gauss-Legendre quadrature.

use crate::normal;

const NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in NODES.iter().zip(WEIGHTS) {
        s += w * (f(mid - half * x) + f(mid + half * x));
    }
    s * half
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (a + b);
    let left = gauss_legendre(f, a, mid);
    let right = gauss_legendre(f, mid, b);
    if depth == 0 || (left + right - whole).abs() <= tol {
        return left + right;
    }
    adaptive(f, a, mid, left, 0.5 * tol, depth - 1) + adaptive(f, mid, b, right, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss-Legendre integral of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let whole = gauss_legendre(&f, a, b);
    adaptive(&f, a, b, whole, tol, 40)
}

fn density(h: f64, k: f64, r: f64) -> f64 {
    let s = 1.0 - r * r;
    (-(h * h - 2.0 * r * h * k + k * k) / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s.sqrt())
}

/// `P(U <= h, V <= k)` for standard normals with correlation `rho`.
pub fn bvn_cdf(h: f64, k: f64, rho: f64) -> f64 {
    if rho >= 1.0 {
        return normal::cdf(h.min(k));
    }
    if rho <= -1.0 {
        return (normal::cdf(h) - normal::cdf(-k)).max(0.0);
    }
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return normal::cdf(k);
    }
    if k == f64::INFINITY {
        return normal::cdf(h);
    }
    let base = normal::cdf(h) * normal::cdf(k);
    if rho == 0.0 {
        return base;
    }
    let v = base + integrate(|r| density(h, k, r), 0.0, rho, 1e-13);
    v.clamp(0.0, 1.0)
}

/// `P(U > h, V > k)`, the orthant used by probit selection models.
pub fn bvn_upper(h: f64, k: f64, rho: f64) -> f64 {
    bvn_cdf(-h, -k, rho)
}
