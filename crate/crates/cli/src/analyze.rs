//! `analyze`: fit every configured model to one dataset.

use std::path::Path;

use anyhow::{bail, Context, Result};
use mnar_core::evidence::EvidenceConfig;
use mnar_core::interval::credible_intervals;
use mnar_core::io::{chain_csv, counts_csv, draws_csv, read_input, DataInput};
use mnar_core::rng::{domain, hash_path};
use mnar_core::saturated::mar_estimate;
use mnar_core::sim::ModelSpec;
use mnar_core::{bayes_factor, heckman_fit, AssumptionSpec, IntervalSummary, QzMode};
use serde_json::{json, Value};

use crate::config::{parse_qz, NamedModel};
use crate::{write_file, Globals, Usage};

pub const DEFAULT_LEVELS: [f64; 2] = [0.8, 0.95];
pub const DEFAULT_DRAWS: usize = 10_000;

/// Models fitted when the config names none.
pub fn default_models() -> Vec<NamedModel> {
    vec![
        NamedModel::new("mar", ModelSpec::Mar),
        NamedModel::new("sat", ModelSpec::Saturated(AssumptionSpec::none())),
        NamedModel::new("heckman", ModelSpec::Heckman),
        NamedModel::new("betabias", ModelSpec::Saturated(AssumptionSpec::lognormal_betabias(0.4, 5.0, 2.0))),
    ]
}

pub struct AnalyzeArgs<'a> {
    pub input: Option<&'a Path>,
    pub levels: Option<Vec<f64>>,
    pub qz: Option<String>,
}

/// Posterior summary of one model, or the reason it has none.
struct Fitted {
    psi: Option<Vec<f64>>,
    acceptance: Value,
    computed: bool,
    error: Option<String>,
    export: Option<(String, String)>,
}

pub fn run(g: &Globals, args: AnalyzeArgs) -> Result<()> {
    let cfg = &g.config;
    let input = match (args.input, cfg.get("analyze", "input")) {
        (Some(p), _) => p.to_path_buf(),
        // Relative to the config file's directory.
        (None, Some(p)) => g.config_dir().join(p),
        (None, None) => bail!(Usage("analyze needs an input file, on the command line or as [analyze] input".into())),
    };
    let levels = match args.levels {
        Some(l) => l,
        None => cfg.parse_list("analyze", "levels")?.unwrap_or_else(|| DEFAULT_LEVELS.to_vec()),
    };
    if levels.is_empty() || levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
        bail!(Usage(format!("credible levels must lie in (0,1), got {levels:?}")));
    }
    let mut levels = levels;
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let qz = match args.qz.as_deref().or(cfg.get("analyze", "qz")) {
        Some(v) => parse_qz(v)?,
        None => QzMode::Posterior,
    };
    let seed = g.seed_or(cfg.parse("analyze", "seed")?, 1);
    let draws = g.draws_or(cfg.parse("analyze", "draws")?, DEFAULT_DRAWS);
    let mut models = cfg.models()?;
    if models.is_empty() {
        models = default_models();
    }
    if models.iter().any(|m| m.model == ModelSpec::Oracle) {
        bail!("the oracle model needs complete data and is only available in `simulate`");
    }
    let gibbs = cfg.gibbs()?;
    let mut evidence = EvidenceConfig { required: draws, qz, ..Default::default() };
    if let Some(a) = cfg.parse("analyze", "prior_attempts")? {
        evidence.prior_attempts = a;
    }

    let file = std::fs::File::open(&input).with_context(|| format!("opening {}", input.display()))?;
    let data = read_input(file).with_context(|| format!("reading {}", input.display()))?;
    let counts = data.counts();
    let rows = match &data {
        DataInput::Rows(r) => r.clone(),
        // Heckman needs unit-level data; counts determine it up to order.
        DataInput::Counts(c) => c.to_rows(),
    };

    let mut report_models = Vec::new();
    let mut interval_lines = String::from("model,level,lo,mean,hi\n");
    for (j, m) in models.iter().enumerate() {
        let mseed = hash_path(seed, &[domain::MODEL, j as u64]);
        let fitted = match fit(&m.model, &counts, &rows, &evidence, &gibbs, mseed) {
            Ok(f) => f,
            Err(e) => Fitted { psi: None, acceptance: Value::Null, computed: false, error: Some(e.to_string()), export: None },
        };
        let mut intervals: Vec<IntervalSummary> = Vec::new();
        let (mut mean, mut p_pos) = (Value::Null, Value::Null);
        if let Some(psi) = &fitted.psi {
            intervals = credible_intervals(psi, &levels)?;
            mean = json!(psi.iter().sum::<f64>() / psi.len() as f64);
            p_pos = json!(psi.iter().filter(|&&v| v > 0.0).count() as f64 / psi.len() as f64);
        }
        for iv in &intervals {
            interval_lines += &format!("{},{},{},{},{}\n", m.name, iv.level, iv.lower, iv.mean, iv.upper);
        }
        if let Some((suffix, text)) = &fitted.export {
            write_file(&g.out, &format!("{suffix}_{}.csv", m.name), text)?;
        }
        report_models.push(json!({
            "name": m.name,
            "model": model_kind(&m.model),
            "computed": fitted.computed,
            "mean": mean,
            "p_positive": p_pos,
            "intervals": intervals,
            "acceptance": fitted.acceptance,
            "error": fitted.error,
        }));
    }

    let counts_text = counts_csv(&counts);
    let report = json!({
        "input": input.file_name().map(|s| s.to_string_lossy().into_owned()),
        "seed": seed,
        "draws": draws,
        "levels": levels,
        "n": counts.total(),
        "missing": counts.missing(),
        "models": report_models,
    });
    write_file(&g.out, "report.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    write_file(&g.out, "intervals.csv", &interval_lines)?;
    write_file(&g.out, "counts.csv", &counts_text)?;
    write_file(&g.out, "manifest.json", &crate::manifest(g, seed, &counts_text)?)?;
    print!("{interval_lines}");
    Ok(())
}

fn model_kind(m: &ModelSpec) -> String {
    match m {
        ModelSpec::Saturated(s) => s.kind.name().to_string(),
        other => other.label(),
    }
}

fn fit(
    model: &ModelSpec,
    counts: &mnar_core::CountsTable,
    rows: &[mnar_core::model::Row],
    evidence: &EvidenceConfig,
    gibbs: &mnar_core::GibbsConfig,
    seed: u64,
) -> mnar_core::Result<Fitted> {
    Ok(match model {
        ModelSpec::Saturated(spec) => {
            let run = bayes_factor(spec, counts, evidence, seed)?;
            let acceptance = if spec.kind == mnar_core::AssumptionKind::None {
                Value::Null
            } else {
                let mut v = serde_json::to_value(&run.report).expect("report serialises");
                v["bf_is_lower_bound"] = json!(!run.report.computed);
                v
            };
            Fitted {
                psi: run.draws.as_ref().map(|d| d.psi()),
                acceptance,
                computed: run.report.computed,
                error: None,
                export: run.draws.as_ref().map(|d| ("draws".to_string(), draws_csv(d))),
            }
        }
        ModelSpec::Mar => {
            let d = mar_estimate(counts, evidence.required, evidence.qz, seed)?;
            Fitted { psi: Some(d.psi()), acceptance: Value::Null, computed: true, error: None, export: Some(("draws".into(), draws_csv(&d))) }
        }
        ModelSpec::Heckman => {
            let fit = heckman_fit(rows, gibbs, seed)?;
            Fitted {
                psi: Some(fit.psi.clone()),
                acceptance: json!({ "rho_acceptance": fit.rho_acceptance }),
                computed: true,
                error: None,
                export: Some(("chain".into(), chain_csv(&fit))),
            }
        }
        ModelSpec::Oracle => unreachable!("rejected before fitting"),
    })
}
