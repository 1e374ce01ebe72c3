//! Rejection samplers for the restricted priors.
//!
//! The `x = 0` and `x = 1` parameters are a priori and a posteriori
//! independent under every restriction set, so each stratum is proposed and
//! accepted on its own and accepted draws are paired by position. The joint
//! acceptance rate is the product of the two stratum rates.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assumption::{AssumptionKind, AssumptionSpec};
use crate::error::{invalid, Error, Result};
use crate::model::{
    CellIndex, CellParams, CountsTable, DirichletHyper, JointDraw, MissingCellParam, PosteriorDraws,
    StratumTally,
};
use crate::omega::{dirac_map, posbias_omega_floor};
use crate::rng::{domain, Streams};
use crate::saturated::{
    conjugate_update, sample_saturated_posterior, stratum_odds_ratio, DirichletSampler, QzMode, QzSampler,
    SaturatedPosterior,
};

/// Accepted-draw target and per-stratum attempt cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttemptBudget {
    pub required: usize,
    pub max_attempts: u64,
    pub bf_fail_threshold: f64,
}

impl AttemptBudget {
    pub const DEFAULT_REQUIRED: usize = 1000;
    pub const DEFAULT_THRESHOLD: f64 = 10.0;

    /// Cap chosen so that running out of attempts means the posterior
    /// acceptance rate is below `prior_ar / threshold`, that is, a Bayes
    /// factor above `threshold` against the restriction.
    pub fn from_prior_ar(required: usize, prior_ar: f64, threshold: f64) -> Result<Self> {
        if required == 0 {
            return Err(invalid("required draws must be at least 1"));
        }
        if !(prior_ar > 0.0 && prior_ar <= 1.0) {
            return Err(invalid(format!("prior acceptance rate {prior_ar} outside (0,1]")));
        }
        if !(threshold >= 1.0) {
            return Err(invalid(format!("failure threshold {threshold} must be at least 1")));
        }
        let max_attempts = (required as f64 * threshold / prior_ar).ceil() as u64;
        Ok(Self { required, max_attempts, bf_fail_threshold: threshold })
    }

    pub fn fixed(required: usize, max_attempts: u64) -> Self {
        Self { required, max_attempts, bf_fail_threshold: Self::DEFAULT_THRESHOLD }
    }
}

#[derive(Debug, Clone, Copy)]
enum Rule {
    Unrestricted,
    Exact { posbias: bool },
    Threshold { t_l: f64, t_h: f64 },
    Lognormal { inv_two_var: f64 },
    BetaBias { inv_two_var: f64, a: f64, b: f64 },
}

/// Proposal and acceptance rule for one stratum pair `(x,0), (x,1)`.
#[derive(Debug, Clone)]
pub(crate) struct StratumKernel {
    rule: Rule,
    /// `[x][z]`.
    cells: [[DirichletSampler; 2]; 2],
}

/// Lognormal acceptance probability, simplified from the density ratio.
#[inline]
pub fn lognormal_accept_prob(log_or: f64, sigma: f64) -> f64 {
    (-log_or * log_or / (2.0 * sigma * sigma)).exp()
}

/// `f(h; a, b) / f(mode; a, b)` for the Beta density, zero off `(0,1)`.
#[inline]
pub fn beta_mode_ratio(h: f64, a: f64, b: f64) -> f64 {
    if !(h > 0.0 && h < 1.0) {
        return 0.0;
    }
    let m = (a - 1.0) / (a + b - 2.0);
    ((a - 1.0) * (h / m).ln() + (b - 1.0) * ((1.0 - h) / (1.0 - m)).ln()).exp()
}

/// Shift of `omega` relative to the observed success rate, mapped to `(0,1)`.
#[inline]
pub fn bias_h(omega: f64, q: &crate::model::ObservedCellParams<f64>) -> f64 {
    (omega - posbias_omega_floor(q) + 1.0) / 2.0
}

impl StratumKernel {
    pub(crate) fn new(spec: &AssumptionSpec, counts: &CountsTable) -> Result<Self> {
        spec.validate()?;
        let post = conjugate_update(&spec.hyper, counts);
        let exact = matches!(spec.kind, AssumptionKind::ExactIv | AssumptionKind::ExactIvPosBias);
        let sampler = |i: usize| -> Result<DirichletSampler> {
            let mut h = post[i];
            // The `(x,0)` cell carries the 1 / q0dot Jacobian of the map that
            // fixes its omega, which lowers its missing-mass shape by one.
            if exact && i.is_multiple_of(2) {
                h = DirichletHyper { a3: h.a3 - 1.0, ..h };
            }
            DirichletSampler::new(&h)
        };
        let inv_two_var = 1.0 / (2.0 * spec.sigma * spec.sigma);
        let rule = match spec.kind {
            AssumptionKind::None => Rule::Unrestricted,
            AssumptionKind::ExactIv => Rule::Exact { posbias: false },
            AssumptionKind::ExactIvPosBias => Rule::Exact { posbias: true },
            AssumptionKind::ThresholdIv => Rule::Threshold { t_l: spec.t_l, t_h: spec.t_h },
            AssumptionKind::LognormalIv => Rule::Lognormal { inv_two_var },
            AssumptionKind::LognormalBetaBias => Rule::BetaBias { inv_two_var, a: spec.a, b: spec.b },
        };
        Ok(Self { rule, cells: [[sampler(0)?, sampler(1)?], [sampler(2)?, sampler(3)?]] })
    }

    /// One proposal for stratum `x`; `Some` when accepted.
    #[inline]
    pub(crate) fn attempt<R: Rng>(&self, x: usize, rng: &mut R) -> Option<[CellParams<f64>; 2]> {
        let q0 = self.cells[x][0].draw(rng);
        let q1 = self.cells[x][1].draw(rng);
        let w1: f64 = rng.random();
        let w0 = match self.rule {
            Rule::Exact { posbias } => {
                let w0 = dirac_map(&q0, &q1, w1)?;
                if !(0.0..=1.0).contains(&w0) {
                    return None;
                }
                if posbias && (w0 < posbias_omega_floor(&q0) || w1 < posbias_omega_floor(&q1)) {
                    return None;
                }
                w0
            }
            _ => {
                let w0: f64 = rng.random();
                let accept = match self.rule {
                    Rule::Unrestricted => true,
                    Rule::Threshold { t_l, t_h } => {
                        stratum_odds_ratio(&q0, w0, &q1, w1).is_some_and(|or| t_l <= or && or <= t_h)
                    }
                    Rule::Lognormal { inv_two_var } => {
                        let lor = stratum_odds_ratio(&q0, w0, &q1, w1)?.ln();
                        let p = (-lor * lor * inv_two_var).exp();
                        rng.random::<f64>() < p
                    }
                    Rule::BetaBias { inv_two_var, a, b } => {
                        let lor = stratum_odds_ratio(&q0, w0, &q1, w1)?.ln();
                        let p = (-lor * lor * inv_two_var).exp()
                            * beta_mode_ratio(bias_h(w0, &q0), a, b)
                            * beta_mode_ratio(bias_h(w1, &q1), a, b);
                        rng.random::<f64>() < p
                    }
                    Rule::Exact { .. } => unreachable!(),
                };
                if !accept {
                    return None;
                }
                w0
            }
        };
        let x8 = x as u8;
        Some([
            CellParams::new(CellIndex { x: x8, z: 0 }, q0, MissingCellParam(w0)),
            CellParams::new(CellIndex { x: x8, z: 1 }, q1, MissingCellParam(w1)),
        ])
    }
}

const FIRST_CHUNK: u64 = 1 << 11;
const MAX_CHUNK: u64 = 1 << 17;

/// Accepted stratum draws in attempt order, stopping at the attempt that
/// produced the `required`-th acceptance or at `max_attempts`.
fn run_stratum(
    kernel: &StratumKernel,
    x: usize,
    required: usize,
    max_attempts: u64,
    streams: &Streams,
) -> (Vec<[CellParams<f64>; 2]>, u64) {
    let mut accepted = Vec::with_capacity(required);
    let mut next = 0u64;
    let mut chunk = FIRST_CHUNK;
    while next < max_attempts {
        let end = (next + chunk).min(max_attempts);
        let batch: Vec<(u64, [CellParams<f64>; 2])> = (next..end)
            .into_par_iter()
            .filter_map(|i| {
                let mut rng = streams.rng(&[domain::STRATUM, x as u64, i]);
                kernel.attempt(x, &mut rng).map(|d| (i, d))
            })
            .collect();
        for (i, d) in batch {
            accepted.push(d);
            if accepted.len() == required {
                return (accepted, i + 1);
            }
        }
        next = end;
        chunk = (chunk * 2).min(MAX_CHUNK);
    }
    (accepted, max_attempts)
}

/// Runs `spec` against `counts` until both strata have `budget.required`
/// acceptances. Exhausting the cap in either stratum returns
/// [`Error::BudgetExhausted`] carrying the tally.
pub fn sample_restricted(
    spec: &AssumptionSpec,
    counts: &CountsTable,
    budget: &AttemptBudget,
    qz: QzMode,
    seed: u64,
) -> Result<PosteriorDraws> {
    if budget.required == 0 {
        return Err(invalid("required draws must be at least 1"));
    }
    if spec.kind == AssumptionKind::None {
        spec.validate()?;
        let post = SaturatedPosterior::new(&spec.hyper, counts, qz);
        return sample_saturated_posterior(&post, budget.required, seed);
    }
    let kernel = StratumKernel::new(spec, counts)?;
    let qz_sampler = QzSampler::new(qz, counts)?;
    let streams = Streams::new(seed);
    let (s0, s1) = rayon::join(
        || run_stratum(&kernel, 0, budget.required, budget.max_attempts, &streams),
        || run_stratum(&kernel, 1, budget.required, budget.max_attempts, &streams),
    );
    let tally = StratumTally {
        accepted: [s0.0.len() as u64, s1.0.len() as u64],
        attempted: [s0.1, s1.1],
    };
    if s0.0.len() < budget.required || s1.0.len() < budget.required {
        return Err(Error::BudgetExhausted { tally, required: budget.required });
    }
    let draws = s0
        .0
        .into_iter()
        .zip(s1.0)
        .enumerate()
        .map(|(k, (a, b))| {
            let mut rng = streams.rng(&[domain::QZ, k as u64]);
            JointDraw { cells: [a[0], a[1], b[0], b[1]], qz: qz_sampler.draw(&mut rng) }
        })
        .collect();
    Ok(PosteriorDraws::from_parts(draws, tally, seed))
}

/// Fixed number of proposals per stratum, counting acceptances only.
pub fn acceptance_tally(spec: &AssumptionSpec, counts: &CountsTable, attempts: u64, seed: u64) -> Result<StratumTally> {
    let kernel = StratumKernel::new(spec, counts)?;
    let streams = Streams::new(seed);
    let count = |x: usize| -> u64 {
        (0..attempts)
            .into_par_iter()
            .filter(|&i| {
                let mut rng = streams.rng(&[domain::STRATUM, x as u64, i]);
                kernel.attempt(x, &mut rng).is_some()
            })
            .count() as u64
    };
    let (a0, a1) = rayon::join(|| count(0), || count(1));
    Ok(StratumTally { accepted: [a0, a1], attempted: [attempts, attempts] })
}

pub fn sample_exact_iv(
    hyper: &DirichletHyper,
    counts: &CountsTable,
    budget: &AttemptBudget,
    qz: QzMode,
    seed: u64,
) -> Result<PosteriorDraws> {
    sample_restricted(&AssumptionSpec::exact_iv().with_hyper(*hyper), counts, budget, qz, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn sample_threshold_iv(
    hyper: &DirichletHyper,
    counts: &CountsTable,
    t_l: f64,
    t_h: f64,
    budget: &AttemptBudget,
    qz: QzMode,
    seed: u64,
) -> Result<PosteriorDraws> {
    sample_restricted(&AssumptionSpec::threshold_iv(t_l, t_h).with_hyper(*hyper), counts, budget, qz, seed)
}

pub fn sample_lognormal_iv(
    hyper: &DirichletHyper,
    counts: &CountsTable,
    sigma: f64,
    budget: &AttemptBudget,
    qz: QzMode,
    seed: u64,
) -> Result<PosteriorDraws> {
    sample_restricted(&AssumptionSpec::lognormal_iv(sigma).with_hyper(*hyper), counts, budget, qz, seed)
}

pub fn sample_exact_iv_posbias(
    hyper: &DirichletHyper,
    counts: &CountsTable,
    budget: &AttemptBudget,
    qz: QzMode,
    seed: u64,
) -> Result<PosteriorDraws> {
    sample_restricted(&AssumptionSpec::exact_iv_posbias().with_hyper(*hyper), counts, budget, qz, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn sample_lognormal_betabias(
    hyper: &DirichletHyper,
    counts: &CountsTable,
    sigma: f64,
    a: f64,
    b: f64,
    budget: &AttemptBudget,
    qz: QzMode,
    seed: u64,
) -> Result<PosteriorDraws> {
    sample_restricted(&AssumptionSpec::lognormal_betabias(sigma, a, b).with_hyper(*hyper), counts, budget, qz, seed)
}
