//! `simulate`: replicated studies from a `[study]`/`[dgp]` config.

use anyhow::{bail, Context, Result};
use mnar_core::io::{counts_csv, rows_csv};
use mnar_core::rng::{domain, hash_path};
use mnar_core::sim::{generate, run_study, summary_csv, BiasDirection, DgpSpec, ModelSpec, StudyConfig};

use crate::config::{parse_bool, parse_qz, Config};
use crate::{write_file, Globals};

/// Replicate count behind `--full`.
pub const FULL_REPLICATES: usize = 200;

pub fn dgp_from_config(cfg: &Config) -> Result<DgpSpec> {
    let target = cfg.parse::<f64>("dgp", "target_missing")?.unwrap_or(0.2);
    let iv_holds = cfg.get("dgp", "iv_holds").map(parse_bool).transpose()?.unwrap_or(true);
    let bias = match cfg.get("dgp", "bias").map(str::to_ascii_lowercase).as_deref() {
        None | Some("positive") => BiasDirection::Positive,
        Some("negative") => BiasDirection::Negative,
        Some(other) => bail!("[dgp] bias = `{other}`: expected positive or negative"),
    };
    let mut d = match cfg.get("dgp", "kind").map(str::to_ascii_lowercase).as_deref() {
        None | Some("heckman") => DgpSpec::heckman(target, iv_holds, bias),
        Some("saturated") => DgpSpec::saturated(target, iv_holds, bias),
        Some(other) => bail!("[dgp] kind = `{other}`: expected heckman or saturated"),
    };
    if let Some(n) = cfg.parse("dgp", "n")? {
        d.n = n;
    }
    for (key, slot) in [("beta0", &mut d.beta0), ("beta1", &mut d.beta1), ("beta2", &mut d.beta2), ("rho", &mut d.rho)] {
        if let Some(v) = cfg.parse("dgp", key)? {
            *slot = v;
        }
    }
    d.validate().context("[dgp]")?;
    Ok(d)
}

pub fn study_from_config(g: &Globals, replicates: Option<usize>, full: bool) -> Result<StudyConfig> {
    let cfg = &g.config;
    let dgp = dgp_from_config(cfg)?;
    let named = cfg.models()?;
    let models: Vec<ModelSpec> =
        if named.is_empty() { ModelSpec::standard_list() } else { named.into_iter().map(|m| m.model).collect() };
    let reps = if full {
        FULL_REPLICATES
    } else {
        replicates.or(cfg.parse("study", "replicates")?).unwrap_or(50)
    };
    let seed = g.seed_or(cfg.parse("study", "seed")?, 1);
    let mut study = StudyConfig::new(dgp, models, reps, seed);
    if let Some(l) = cfg.parse("study", "level")? {
        study.level = l;
    }
    study.evidence.required = g.draws_or(cfg.parse("study", "draws")?, study.evidence.required);
    if let Some(a) = cfg.parse("study", "prior_attempts")? {
        study.evidence.prior_attempts = a;
    }
    if let Some(q) = cfg.get("study", "qz") {
        study.evidence.qz = parse_qz(q)?;
    }
    study.gibbs = cfg.gibbs()?;
    study.validate().context("study config")?;
    Ok(study)
}

pub fn run(g: &Globals, replicates: Option<usize>, full: bool) -> Result<()> {
    let study = study_from_config(g, replicates, full)?;
    let result = run_study(&study)?;

    let mut per_rep = String::from("replicate,psi_true,model,ar,bf,computed,covered,width\n");
    let na = |v: Option<String>| v.unwrap_or_else(|| "NA".into());
    for r in &result.replicates {
        for o in &r.outcomes {
            per_rep += &format!(
                "{},{},{},{},{},{},{},{}\n",
                r.replicate,
                r.psi_true,
                o.model,
                na(o.ar.map(|v| v.to_string())),
                na(o.bf.map(|v| v.to_string())),
                o.computed,
                na(o.covered.map(|v| v.to_string())),
                na(o.width.map(|v| v.to_string())),
            );
        }
    }

    // Replicate 0 again, for inspection and re-analysis.
    let data = generate(&study.dgp, hash_path(study.seed, &[domain::REPLICATE, 0, domain::DGP]))?;
    let counts_text = counts_csv(&data.counts());

    let summary = summary_csv(&result.summary);
    write_file(&g.out, "results.csv", &summary)?;
    write_file(&g.out, "replicates.csv", &per_rep)?;
    write_file(&g.out, "summary.json", &(serde_json::to_string_pretty(&result.summary)? + "\n"))?;
    write_file(&g.out, "counts_rep0.csv", &counts_text)?;
    write_file(&g.out, "rows_rep0.csv", &rows_csv(&data.rows))?;
    write_file(&g.out, "manifest.json", &crate::manifest(g, study.seed, &counts_text)?)?;
    print!("{summary}");
    Ok(())
}
