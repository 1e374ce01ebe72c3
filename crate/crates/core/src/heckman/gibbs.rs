//! Data-augmentation Gibbs sampler for the binary selection model.

use nalgebra::{Matrix2, Matrix3, SMatrix, SVector, Vector2, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::truncnorm::truncated_normal;
use super::HeckmanParams;
use crate::error::{invalid, Error, Result};
use crate::model::Row;
use crate::rng::{domain, Streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    /// Total sweeps including burn-in.
    pub iterations: usize,
    pub burn_in: usize,
    pub prior_mean_b1: [f64; 3],
    pub prior_cov_b1: [[f64; 3]; 3],
    pub prior_mean_b2: [f64; 2],
    pub prior_cov_b2: [[f64; 2]; 2],
    /// Standard deviation of the random-walk proposal for `rho`.
    pub mh_sd: f64,
    /// Holds `rho` at a fixed value instead of sampling it.
    pub fixed_rho: Option<f64>,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 1000,
            prior_mean_b1: [0.0; 3],
            prior_cov_b1: [[10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, 0.0, 10.0]],
            prior_mean_b2: [0.0; 2],
            prior_cov_b2: [[10.0, 0.0], [0.0, 10.0]],
            mh_sd: 0.05,
            fixed_rho: None,
        }
    }
}

/// Prior precision and precision-weighted mean derived from a config.
#[derive(Debug, Clone, Copy)]
struct Priors {
    prec1: Matrix3<f64>,
    shift1: Vector3<f64>,
    prec2: Matrix2<f64>,
    shift2: Vector2<f64>,
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(invalid("iterations must exceed burn-in"));
        }
        if !(self.mh_sd > 0.0) {
            return Err(invalid("mh_sd must be positive"));
        }
        if let Some(r) = self.fixed_rho {
            if !(r > -1.0 && r < 1.0) {
                return Err(invalid("fixed rho outside (-1,1)"));
            }
        }
        self.priors().map(|_| ())
    }

    fn priors(&self) -> Result<Priors> {
        let b1 = Matrix3::from_fn(|i, j| self.prior_cov_b1[i][j]);
        let b2 = Matrix2::from_fn(|i, j| self.prior_cov_b2[i][j]);
        if b1 != b1.transpose() || b2 != b2.transpose() {
            return Err(invalid("prior covariances must be symmetric"));
        }
        let prec1 = b1.cholesky().ok_or(Error::NotPositiveDefinite)?.inverse();
        let prec2 = b2.cholesky().ok_or(Error::NotPositiveDefinite)?.inverse();
        Ok(Priors {
            prec1,
            shift1: prec1 * Vector3::from(self.prior_mean_b1),
            prec2,
            shift2: prec2 * Vector2::from(self.prior_mean_b2),
        })
    }
}

/// Design vectors and fixed cross-products for one dataset.
#[derive(Debug, Clone)]
pub struct HeckmanData {
    c1: Vec<Vector3<f64>>,
    c2: Vec<Vector2<f64>>,
    r: Vec<bool>,
    /// Units with `R = 1`, and their outcomes.
    observed: Vec<usize>,
    y: Vec<bool>,
    xx1_missing: Matrix3<f64>,
    xx1_observed: Matrix3<f64>,
    xx2_observed: Matrix2<f64>,
}

impl HeckmanData {
    pub fn from_rows(rows: &[Row]) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("no rows"));
        }
        let mut d = Self {
            c1: Vec::with_capacity(rows.len()),
            c2: Vec::with_capacity(rows.len()),
            r: Vec::with_capacity(rows.len()),
            observed: Vec::new(),
            y: Vec::new(),
            xx1_missing: Matrix3::zeros(),
            xx1_observed: Matrix3::zeros(),
            xx2_observed: Matrix2::zeros(),
        };
        for (i, row) in rows.iter().enumerate() {
            let (x, z) = (f64::from(row.x), f64::from(row.z));
            let c1 = Vector3::new(1.0, x, z);
            let c2 = Vector2::new(1.0, x);
            match (row.r, row.y) {
                (true, Some(y)) => {
                    d.observed.push(i);
                    d.y.push(y);
                    d.xx1_observed += c1 * c1.transpose();
                    d.xx2_observed += c2 * c2.transpose();
                }
                (false, None) => d.xx1_missing += c1 * c1.transpose(),
                _ => return Err(Error::Parse { row: i + 1, msg: "outcome present on a missing row".into() }),
            }
            d.c1.push(c1);
            d.c2.push(c2);
            d.r.push(row.r);
        }
        if d.observed.is_empty() {
            return Err(invalid("the outcome equation needs at least one observed row"));
        }
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn n_observed(&self) -> usize {
        self.observed.len()
    }
}

/// Chain state: parameters plus latent utilities. `ystar` is aligned with
/// the observed units.
#[derive(Debug, Clone, PartialEq)]
pub struct HeckmanState {
    pub params: HeckmanParams,
    pub rstar: Vec<f64>,
    pub ystar: Vec<f64>,
}

fn side(positive: bool) -> (f64, f64) {
    if positive {
        (0.0, f64::INFINITY)
    } else {
        (f64::NEG_INFINITY, 0.0)
    }
}

impl HeckmanState {
    /// Coefficients at zero and latents drawn from their truncated priors.
    pub fn init<R: Rng>(data: &HeckmanData, rho: f64, rng: &mut R) -> Result<Self> {
        let params = HeckmanParams::new([0.0; 3], [0.0; 2], rho)?;
        let rstar = data
            .r
            .iter()
            .map(|&r| {
                let (lo, hi) = side(r);
                truncated_normal(0.0, 1.0, lo, hi, rng)
            })
            .collect::<Result<_>>()?;
        let ystar = data
            .y
            .iter()
            .map(|&y| {
                let (lo, hi) = side(y);
                truncated_normal(0.0, 1.0, lo, hi, rng)
            })
            .collect::<Result<_>>()?;
        Ok(Self { params, rstar, ystar })
    }

    /// Every latent agrees in sign with its observed indicator.
    pub fn signs_consistent(&self, data: &HeckmanData) -> bool {
        self.rstar.iter().zip(&data.r).all(|(&v, &r)| (v > 0.0) == r || (v == 0.0 && !r))
            && self.ystar.iter().zip(&data.y).all(|(&v, &y)| (v > 0.0) == y || (v == 0.0 && !y))
    }
}

fn draw_mvn<const D: usize, R: Rng>(
    precision: SMatrix<f64, D, D>,
    shift: SVector<f64, D>,
    rng: &mut R,
) -> Result<SVector<f64, D>> {
    // With precision L L', the draw is L'^{-1} (L^{-1} shift + e).
    let chol = precision.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let w = l.solve_lower_triangular(&shift).ok_or(Error::NotPositiveDefinite)?;
    let e = SVector::<f64, D>::from_fn(|_, _| rng.sample(StandardNormal));
    l.transpose().solve_upper_triangular(&(w + e)).ok_or(Error::NotPositiveDefinite)
}

/// One random-walk Metropolis update on `(-1, 1)`. Returns the new value and
/// whether the proposal was accepted.
pub fn rho_mh_step<R: Rng>(rho: f64, log_target: impl Fn(f64) -> f64, mh_sd: f64, rng: &mut R) -> (f64, bool) {
    let z: f64 = rng.sample(StandardNormal);
    let proposal = rho + mh_sd * z;
    let u: f64 = rng.random();
    if !(proposal > -1.0 && proposal < 1.0) {
        return (rho, false);
    }
    if u.ln() < log_target(proposal) - log_target(rho) {
        (proposal, true)
    } else {
        (rho, false)
    }
}

/// Bivariate normal log-likelihood of the observed residual pairs, up to a
/// constant, from their sufficient statistics.
fn residual_loglik(rho: f64, n: f64, srr: f64, syy: f64, sry: f64) -> f64 {
    let s = 1.0 - rho * rho;
    -0.5 * n * s.ln() - (srr - 2.0 * rho * sry + syy) / (2.0 * s)
}

/// One full sweep. Returns whether the `rho` proposal was accepted.
pub fn gibbs_step<R: Rng>(state: &mut HeckmanState, data: &HeckmanData, cfg: &GibbsConfig, rng: &mut R) -> Result<bool> {
    let priors = cfg.priors()?;
    sweep(state, data, cfg, &priors, rng)
}

fn sweep<R: Rng>(
    state: &mut HeckmanState,
    data: &HeckmanData,
    cfg: &GibbsConfig,
    priors: &Priors,
    rng: &mut R,
) -> Result<bool> {
    let gamma = Vector3::from(state.params.gamma);
    let beta = Vector2::from(state.params.beta);
    let rho = state.params.rho;
    let s = 1.0 - rho * rho;
    let sd = s.sqrt();

    // Selection latents. Missing units only see the selection equation.
    let mut k = 0;
    for i in 0..data.len() {
        let mean = gamma.dot(&data.c1[i]);
        state.rstar[i] = if data.r[i] {
            let cond = mean + rho * (state.ystar[k] - beta.dot(&data.c2[i]));
            k += 1;
            truncated_normal(cond, sd, 0.0, f64::INFINITY, rng)?
        } else {
            truncated_normal(mean, 1.0, f64::NEG_INFINITY, 0.0, rng)?
        };
    }

    // Outcome latents on observed units.
    for (k, &i) in data.observed.iter().enumerate() {
        let cond = beta.dot(&data.c2[i]) + rho * (state.rstar[i] - gamma.dot(&data.c1[i]));
        let (lo, hi) = side(data.y[k]);
        state.ystar[k] = truncated_normal(cond, sd, lo, hi, rng)?;
    }

    // Selection coefficients.
    let mut m1 = priors.shift1;
    let mut k = 0;
    for i in 0..data.len() {
        if data.r[i] {
            let adj = state.rstar[i] - rho * (state.ystar[k] - beta.dot(&data.c2[i]));
            m1 += data.c1[i] * (adj / s);
            k += 1;
        } else {
            m1 += data.c1[i] * state.rstar[i];
        }
    }
    let p1 = priors.prec1 + data.xx1_missing + data.xx1_observed / s;
    let gamma = draw_mvn(p1, m1, rng)?;

    // Outcome coefficients.
    let mut m2 = priors.shift2;
    for (k, &i) in data.observed.iter().enumerate() {
        let adj = state.ystar[k] - rho * (state.rstar[i] - gamma.dot(&data.c1[i]));
        m2 += data.c2[i] * (adj / s);
    }
    let p2 = priors.prec2 + data.xx2_observed / s;
    let beta = draw_mvn(p2, m2, rng)?;

    // Correlation.
    let (rho, accepted) = match cfg.fixed_rho {
        Some(r) => (r, false),
        None => {
            let (mut srr, mut syy, mut sry) = (0.0, 0.0, 0.0);
            for (k, &i) in data.observed.iter().enumerate() {
                let er = state.rstar[i] - gamma.dot(&data.c1[i]);
                let ey = state.ystar[k] - beta.dot(&data.c2[i]);
                srr += er * er;
                syy += ey * ey;
                sry += er * ey;
            }
            let n = data.n_observed() as f64;
            rho_mh_step(rho, |r| residual_loglik(r, n, srr, syy, sry), cfg.mh_sd, rng)
        }
    };

    state.params = HeckmanParams { gamma: gamma.into(), beta: beta.into(), rho };
    Ok(accepted)
}

/// Kept draws of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeckmanFit {
    pub params: Vec<HeckmanParams>,
    pub psi: Vec<f64>,
    /// Share of `rho` proposals accepted after burn-in.
    pub rho_acceptance: f64,
}

impl HeckmanFit {
    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }
}

/// Runs a single chain and returns the post-burn-in draws.
pub fn heckman_fit(rows: &[Row], cfg: &GibbsConfig, seed: u64) -> Result<HeckmanFit> {
    cfg.validate()?;
    if cfg.iterations < cfg.burn_in + 500 {
        return Err(invalid("keep at least 500 draws after burn-in"));
    }
    let data = HeckmanData::from_rows(rows)?;
    let priors = cfg.priors()?;
    let mut rng = Streams::new(seed).rng(&[domain::GIBBS]);
    let mut state = HeckmanState::init(&data, cfg.fixed_rho.unwrap_or(0.0), &mut rng)?;
    let keep = cfg.iterations - cfg.burn_in;
    let mut params = Vec::with_capacity(keep);
    let mut accepted = 0usize;
    for it in 0..cfg.iterations {
        let acc = sweep(&mut state, &data, cfg, &priors, &mut rng)?;
        if it >= cfg.burn_in {
            accepted += usize::from(acc);
            params.push(state.params);
        }
    }
    let psi = params.iter().map(HeckmanParams::psi).collect();
    Ok(HeckmanFit { params, psi, rho_acceptance: accepted as f64 / keep as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rows_from_rates(n_per_x: usize, p: [f64; 2], seed: u64) -> Vec<Row> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for x in 0..2u8 {
            for i in 0..n_per_x {
                let y = rng.random::<f64>() < p[x as usize];
                rows.push(Row::new(x, (i % 2) as u8, true, Some(y)).unwrap());
            }
        }
        rows
    }

    #[test]
    fn fixed_zero_rho_recovers_probit_fit() {
        let rows = rows_from_rates(1500, [0.3, 0.65], 1);
        let cfg = GibbsConfig { iterations: 3000, burn_in: 500, fixed_rho: Some(0.0), ..Default::default() };
        let fit = heckman_fit(&rows, &cfg, 3).unwrap();
        // With a binary regressor the probit maximum likelihood fit is closed form.
        let rate = |x: u8| {
            let ys: Vec<bool> = rows.iter().filter(|r| r.x == x).map(|r| r.y.unwrap()).collect();
            ys.iter().filter(|&&y| y).count() as f64 / ys.len() as f64
        };
        let b0 = normal::inv_cdf(rate(0));
        let b1 = normal::inv_cdf(rate(1)) - b0;
        for (j, target) in [(0, b0), (1, b1)] {
            let v: Vec<f64> = fit.params.iter().map(|p| p.beta[j]).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
            assert!((m - target).abs() < 2.0 * sd, "beta{j}: {m} vs {target} (sd {sd})");
        }
    }

    #[test]
    fn saturated_outcome_predictive_matches_rates() {
        // Y constant within X: predictive probabilities approach 0 and 1.
        let mut rows = Vec::new();
        for i in 0..400 {
            rows.push(Row::new(0, (i % 2) as u8, true, Some(false)).unwrap());
            rows.push(Row::new(1, (i % 2) as u8, true, Some(true)).unwrap());
        }
        let cfg = GibbsConfig { iterations: 1500, burn_in: 500, fixed_rho: Some(0.0), ..Default::default() };
        let fit = heckman_fit(&rows, &cfg, 4).unwrap();
        let p0 = fit.params.iter().map(|p| normal::cdf(p.beta[0])).sum::<f64>() / fit.len() as f64;
        let p1 = fit.params.iter().map(|p| normal::cdf(p.beta[0] + p.beta[1])).sum::<f64>() / fit.len() as f64;
        assert!(p0 < 0.01 && p1 > 0.99, "{p0} {p1}");
    }

    #[test]
    fn proposals_outside_the_interval_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let (r, acc) = rho_mh_step(0.999, |_| 0.0, 0.5, &mut rng);
            assert!(r > -1.0 && r < 1.0);
            if r != 0.999 {
                assert!(acc);
            }
        }
    }

    #[test]
    fn prior_only_rho_chain_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut rho = 0.0;
        let mut kept = Vec::new();
        for i in 0..2_000_000 {
            rho = rho_mh_step(rho, |_| 0.0, 0.5, &mut rng).0;
            if i % 20 == 0 {
                kept.push(rho);
            }
        }
        kept.sort_by(f64::total_cmp);
        let n = kept.len() as f64;
        let ks = kept
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = (v + 1.0) / 2.0;
                ((i + 1) as f64 / n - f).max(f - i as f64 / n)
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "{ks}");
    }

    #[test]
    fn latents_respect_signs_and_chain_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        for i in 0..300 {
            let x = (i % 2) as u8;
            let z = ((i / 2) % 2) as u8;
            let r = rng.random::<f64>() < 0.7;
            let y = r.then(|| rng.random::<f64>() < 0.4);
            rows.push(Row::new(x, z, r, y).unwrap());
        }
        let data = HeckmanData::from_rows(&rows).unwrap();
        let cfg = GibbsConfig::default();
        let mut state = HeckmanState::init(&data, 0.0, &mut rng).unwrap();
        for _ in 0..50 {
            gibbs_step(&mut state, &data, &cfg, &mut rng).unwrap();
            assert!(state.signs_consistent(&data));
        }
        let short = GibbsConfig { iterations: 800, burn_in: 200, ..Default::default() };
        assert_eq!(heckman_fit(&rows, &short, 9).unwrap(), heckman_fit(&rows, &short, 9).unwrap());
        let too_short = GibbsConfig { iterations: 600, burn_in: 200, ..Default::default() };
        assert!(heckman_fit(&rows, &too_short, 9).is_err());
    }
}
