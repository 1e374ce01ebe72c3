//! Bayes factors from acceptance rates.
//!
//! Rejection from the saturated posterior keeps a draw with probability
//! proportional to the restricted prior density, so the posterior acceptance
//! rate estimates the restricted marginal likelihood over the saturated one
//! times the prior acceptance rate. Their ratio is the Bayes factor of the
//! saturated model against the restriction.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::assumption::{AssumptionKind, AssumptionSpec};
use crate::error::{invalid, Error, Result};
use crate::model::{CountsTable, ObservedCellParams, PosteriorDraws, StratumTally};
use crate::omega::{exact_iv_omega_intervals, exact_iv_posbias_intervals, imperfect_iv_omega_bounds};
use crate::rng::{domain, hash_path};
use crate::samplers::{acceptance_tally, sample_restricted, AttemptBudget};
use crate::saturated::QzMode;

/// A Monte Carlo proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub se: f64,
}

impl RateEstimate {
    /// Product of the two stratum proportions with a delta-method error.
    /// Strata with no acceptances count as one acceptance, so the result is
    /// an upper estimate in that case.
    pub fn from_tally(t: &StratumTally) -> Self {
        let part = |i: usize| -> (f64, f64) {
            let n = t.attempted[i];
            if n == 0 {
                return (1.0, 0.0);
            }
            let r = t.accepted[i].max(1) as f64 / n as f64;
            (r, (r * (1.0 - r) / n as f64).sqrt())
        };
        let ((r0, s0), (r1, s1)) = (part(0), part(1));
        Self { rate: r0 * r1, se: ((r1 * s0).powi(2) + (r0 * s1).powi(2)).sqrt() }
    }
}

type CacheKey = ([u64; 10], u64, u64);

fn cache() -> &'static Mutex<HashMap<CacheKey, RateEstimate>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, RateEstimate>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

pub const MIN_PRIOR_ATTEMPTS: u64 = 10_000;

/// Acceptance rate of the sampler for `spec` run on zero counts.
/// Memoised by spec, attempt count and seed.
pub fn prior_acceptance_rate(spec: &AssumptionSpec, attempts: u64, seed: u64) -> Result<RateEstimate> {
    if attempts < MIN_PRIOR_ATTEMPTS {
        return Err(invalid(format!("prior acceptance needs at least {MIN_PRIOR_ATTEMPTS} attempts")));
    }
    if spec.kind == AssumptionKind::None {
        return Ok(RateEstimate { rate: 1.0, se: 0.0 });
    }
    let key = (spec.key_bits(), attempts, seed);
    if let Some(hit) = cache().lock().expect("cache poisoned").get(&key) {
        return Ok(*hit);
    }
    let tally = acceptance_tally(spec, &CountsTable::zeros(), attempts, hash_path(seed, &[domain::PRIOR_AR]))?;
    let est = RateEstimate::from_tally(&tally);
    cache().lock().expect("cache poisoned").insert(key, est);
    Ok(est)
}

/// Settings shared by every evidence computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceConfig {
    pub required: usize,
    pub prior_attempts: u64,
    pub bf_fail_threshold: f64,
    pub qz: QzMode,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        Self {
            required: AttemptBudget::DEFAULT_REQUIRED,
            prior_attempts: 200_000,
            bf_fail_threshold: AttemptBudget::DEFAULT_THRESHOLD,
            qz: QzMode::Posterior,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    #[serde(skip)]
    pub spec: AssumptionSpec,
    pub kind: AssumptionKind,
    pub prior_ar: f64,
    pub prior_ar_se: f64,
    pub posterior_ar: f64,
    pub posterior_ar_se: f64,
    /// Saturated over restricted. A lower bound when `computed` is false.
    pub bf: f64,
    #[serde(skip)]
    pub bf_se: f64,
    pub computed: bool,
}

impl AcceptanceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialises")
    }
}

/// Posterior draws together with the evidence summary. `draws` is `None`
/// when the sampler exhausted its budget.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceRun {
    pub report: AcceptanceReport,
    pub draws: Option<PosteriorDraws>,
}

/// Samples the restricted posterior and reports the Bayes factor. Budget
/// exhaustion and a Bayes factor above the failure threshold are results
/// (`computed = false`), not errors.
pub fn bayes_factor(spec: &AssumptionSpec, counts: &CountsTable, cfg: &EvidenceConfig, seed: u64) -> Result<EvidenceRun> {
    let prior = prior_acceptance_rate(spec, cfg.prior_attempts, seed)?;
    bayes_factor_with_prior(spec, counts, cfg, prior, seed)
}

/// As [`bayes_factor`] with the prior acceptance rate supplied, so repeated
/// analyses under one spec share a single prior run.
pub fn bayes_factor_with_prior(
    spec: &AssumptionSpec,
    counts: &CountsTable,
    cfg: &EvidenceConfig,
    prior: RateEstimate,
    seed: u64,
) -> Result<EvidenceRun> {
    if spec.kind == AssumptionKind::None {
        let budget = AttemptBudget::fixed(cfg.required, cfg.required as u64);
        let draws = sample_restricted(spec, counts, &budget, cfg.qz, seed)?;
        return Ok(EvidenceRun { report: report(spec, prior, RateEstimate { rate: 1.0, se: 0.0 }, true), draws: Some(draws) });
    }
    let budget = AttemptBudget::from_prior_ar(cfg.required, prior.rate, cfg.bf_fail_threshold)?;
    match sample_restricted(spec, counts, &budget, cfg.qz, seed) {
        Ok(draws) => {
            let post = RateEstimate::from_tally(&draws.tally);
            let r = report(spec, prior, post, true);
            let ok = r.bf <= cfg.bf_fail_threshold;
            Ok(EvidenceRun { report: AcceptanceReport { computed: ok, ..r }, draws: ok.then_some(draws) })
        }
        Err(Error::BudgetExhausted { tally, .. }) => {
            let post = RateEstimate::from_tally(&tally);
            Ok(EvidenceRun { report: report(spec, prior, post, false), draws: None })
        }
        Err(e) => Err(e),
    }
}

fn report(spec: &AssumptionSpec, prior: RateEstimate, post: RateEstimate, computed: bool) -> AcceptanceReport {
    let bf = prior.rate / post.rate;
    let rel = |r: RateEstimate| if r.rate > 0.0 { r.se / r.rate } else { 0.0 };
    AcceptanceReport {
        spec: *spec,
        kind: spec.kind,
        prior_ar: prior.rate,
        prior_ar_se: prior.se,
        posterior_ar: post.rate,
        posterior_ar_se: post.se,
        bf,
        bf_se: bf * (rel(prior).powi(2) + rel(post).powi(2)).sqrt(),
        computed,
    }
}

/// Whether each restriction admits any `omega` at the given cell values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feasibility {
    pub exact_iv: bool,
    pub exact_iv_posbias: bool,
    pub threshold_iv: bool,
}

/// Point-value feasibility of the hard restrictions, typically evaluated at
/// posterior means or in the large-sample limit.
pub fn falsifiability_check(q: &[ObservedCellParams<f64>; 4], t_l: f64, t_h: f64) -> Feasibility {
    let exact_iv = (0..2).all(|x| {
        let (q0, q1) = (&q[2 * x], &q[2 * x + 1]);
        !(q1.q11 - q0.q11 > q0.q0dot || q0.q11 - q1.q11 > q1.q0dot)
    });
    debug_assert_eq!(exact_iv, exact_iv_omega_intervals(q).iter().all(|s| s.free.is_feasible()));
    Feasibility {
        exact_iv,
        exact_iv_posbias: exact_iv_posbias_intervals(q).iter().all(|s| s.free.is_feasible()),
        threshold_iv: (0..2).all(|x| imperfect_iv_omega_bounds(&q[2 * x], &q[2 * x + 1], t_l, t_h).0.is_feasible()),
    }
}
