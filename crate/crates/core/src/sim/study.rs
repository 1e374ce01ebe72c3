//! Replicated simulation experiments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{generate, DgpSpec};
use crate::assumption::{AssumptionKind, AssumptionSpec};
use crate::error::{invalid, Result};
use crate::evidence::{bayes_factor_with_prior, prior_acceptance_rate, EvidenceConfig, RateEstimate};
use crate::heckman::{heckman_fit, GibbsConfig};
use crate::interval::credible_interval;
use crate::rng::{domain, hash_path};
use crate::saturated::{mar_estimate, QzMode};

/// A model fitted in every replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum ModelSpec {
    /// Saturated model, optionally restricted.
    Saturated(AssumptionSpec),
    Heckman,
    /// Missing-at-random fit to the data before any outcome was hidden.
    Oracle,
    Mar,
}

impl ModelSpec {
    pub fn label(&self) -> String {
        match self {
            ModelSpec::Saturated(s) => s.label(),
            ModelSpec::Heckman => "heckman".into(),
            ModelSpec::Oracle => "oracle".into(),
            ModelSpec::Mar => "mar".into(),
        }
    }

    /// Whether acceptance rates and Bayes factors apply.
    pub fn has_evidence(&self) -> bool {
        matches!(self, ModelSpec::Saturated(s) if s.kind != AssumptionKind::None)
    }

    /// The full model list of the first simulation study.
    pub fn standard_list() -> Vec<ModelSpec> {
        let mut v = vec![ModelSpec::Saturated(AssumptionSpec::none())];
        v.extend(AssumptionSpec::restricted_defaults().map(ModelSpec::Saturated));
        v.extend([ModelSpec::Heckman, ModelSpec::Oracle]);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub dgp: DgpSpec,
    pub models: Vec<ModelSpec>,
    pub replicates: usize,
    pub seed: u64,
    pub level: f64,
    pub evidence: EvidenceConfig,
    pub gibbs: GibbsConfig,
}

impl StudyConfig {
    pub fn new(dgp: DgpSpec, models: Vec<ModelSpec>, replicates: usize, seed: u64) -> Self {
        Self {
            dgp,
            models,
            replicates,
            seed,
            level: 0.9,
            evidence: EvidenceConfig { qz: QzMode::Fixed(0.5), ..Default::default() },
            gibbs: GibbsConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(invalid("replicates must be at least 1"));
        }
        if self.models.is_empty() {
            return Err(invalid("no models"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(invalid("level outside (0,1)"));
        }
        for m in &self.models {
            if let ModelSpec::Saturated(s) = m {
                s.validate()?;
            }
        }
        self.dgp.validate()?;
        self.gibbs.validate()
    }
}

/// Result of one model in one replicate. Coverage and width are present
/// only for computed posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub model: String,
    pub ar: Option<f64>,
    pub bf: Option<f64>,
    pub computed: bool,
    pub covered: Option<bool>,
    pub width: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replicate: usize,
    pub psi_true: f64,
    pub outcomes: Vec<ModelOutcome>,
}

/// Aggregate over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub ar: Option<f64>,
    /// Over every replicate; failed ones contribute their lower bound.
    pub bf_geomean: Option<f64>,
    pub bf_geomean_computed: Option<f64>,
    pub computed: f64,
    pub coverage: Option<f64>,
    pub width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub replicates: Vec<ReplicationResult>,
    pub summary: Vec<ModelSummary>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn geomean(v: &[f64]) -> Option<f64> {
    mean(&v.iter().map(|b| b.ln()).collect::<Vec<_>>()).map(f64::exp)
}

fn interval_outcome(label: String, psi: &[f64], truth: f64, level: f64) -> ModelOutcome {
    match credible_interval(psi, level) {
        Ok(ci) => ModelOutcome {
            model: label,
            ar: None,
            bf: None,
            computed: true,
            covered: Some(ci.covers(truth)),
            width: Some(ci.width()),
            error: None,
        },
        Err(e) => failed(label, e.to_string()),
    }
}

fn failed(label: String, msg: String) -> ModelOutcome {
    ModelOutcome { model: label, ar: None, bf: None, computed: false, covered: None, width: None, error: Some(msg) }
}

fn run_model(
    cfg: &StudyConfig,
    model: &ModelSpec,
    prior: Option<RateEstimate>,
    data: &super::dgp::SimDataset,
    seed: u64,
) -> ModelOutcome {
    let label = model.label();
    let truth = data.psi_true;
    let attempt = || -> Result<ModelOutcome> {
        Ok(match model {
            ModelSpec::Saturated(spec) => {
                let prior = prior.unwrap_or(RateEstimate { rate: 1.0, se: 0.0 });
                let run = bayes_factor_with_prior(spec, &data.counts(), &cfg.evidence, prior, seed)?;
                let mut out = match &run.draws {
                    Some(d) => interval_outcome(label.clone(), &d.psi(), truth, cfg.level),
                    None => ModelOutcome { computed: false, ..failed(label.clone(), String::new()) },
                };
                out.error = None;
                if model.has_evidence() {
                    out.ar = Some(run.report.posterior_ar);
                    out.bf = Some(run.report.bf);
                }
                out
            }
            ModelSpec::Heckman => {
                let fit = heckman_fit(&data.rows, &cfg.gibbs, seed)?;
                interval_outcome(label.clone(), &fit.psi, truth, cfg.level)
            }
            ModelSpec::Oracle => {
                let d = mar_estimate(&data.complete_counts(), cfg.evidence.required, cfg.evidence.qz, seed)?;
                interval_outcome(label.clone(), &d.psi(), truth, cfg.level)
            }
            ModelSpec::Mar => {
                let d = mar_estimate(&data.counts(), cfg.evidence.required, cfg.evidence.qz, seed)?;
                interval_outcome(label.clone(), &d.psi(), truth, cfg.level)
            }
        })
    };
    attempt().unwrap_or_else(|e| failed(label, e.to_string()))
}

/// Aggregates per-replicate outcomes. Sums run in replicate order, so the
/// result does not depend on scheduling.
pub fn summarize(models: &[ModelSpec], reps: &[ReplicationResult]) -> Vec<ModelSummary> {
    models
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let outs: Vec<&ModelOutcome> = reps.iter().map(|r| &r.outcomes[j]).collect();
            let ars: Vec<f64> = outs.iter().filter_map(|o| o.ar).collect();
            let bfs: Vec<f64> = outs.iter().filter_map(|o| o.bf).collect();
            let bfs_ok: Vec<f64> = outs.iter().filter(|o| o.computed).filter_map(|o| o.bf).collect();
            let cov: Vec<f64> = outs.iter().filter_map(|o| o.covered.map(f64::from)).collect();
            let wid: Vec<f64> = outs.iter().filter_map(|o| o.width).collect();
            ModelSummary {
                model: m.label(),
                ar: mean(&ars),
                bf_geomean: geomean(&bfs),
                bf_geomean_computed: geomean(&bfs_ok),
                computed: outs.iter().filter(|o| o.computed).count() as f64 / outs.len().max(1) as f64,
                coverage: mean(&cov),
                width: mean(&wid),
            }
        })
        .collect()
}

/// Generates `replicates` datasets and fits every model to each.
/// Replicates run in parallel on streams derived from the study seed.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    // Prior rates do not depend on data, so each spec is run once.
    let priors: Vec<Option<RateEstimate>> = cfg
        .models
        .iter()
        .map(|m| match m {
            ModelSpec::Saturated(s) => prior_acceptance_rate(s, cfg.evidence.prior_attempts, cfg.seed).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<_>>()?;
    let replicates: Vec<ReplicationResult> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let data_seed = hash_path(cfg.seed, &[domain::REPLICATE, r as u64, domain::DGP]);
            match generate(&cfg.dgp, data_seed) {
                Ok(data) => {
                    let outcomes = cfg
                        .models
                        .iter()
                        .enumerate()
                        .map(|(j, m)| {
                            let seed = hash_path(cfg.seed, &[domain::REPLICATE, r as u64, domain::MODEL, j as u64]);
                            run_model(cfg, m, priors[j], &data, seed)
                        })
                        .collect();
                    ReplicationResult { replicate: r, psi_true: data.psi_true, outcomes }
                }
                Err(e) => ReplicationResult {
                    replicate: r,
                    psi_true: f64::NAN,
                    outcomes: cfg.models.iter().map(|m| failed(m.label(), e.to_string())).collect(),
                },
            }
        })
        .collect();
    let summary = summarize(&cfg.models, &replicates);
    Ok(StudyResult { replicates, summary })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

/// `model,ar,bf_geomean,computed,coverage,width`, one row per model.
pub fn summary_csv(summary: &[ModelSummary]) -> String {
    let mut s = String::from("model,ar,bf_geomean,computed,coverage,width\n");
    for m in summary {
        s += &format!(
            "{},{},{},{},{},{}\n",
            m.model,
            cell(m.ar),
            cell(m.bf_geomean),
            m.computed,
            cell(m.coverage),
            cell(m.width)
        );
    }
    s
}
