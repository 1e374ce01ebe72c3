//! `bounds`: closed-form identification regions, no sampling.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use mnar_core::evidence::falsifiability_check;
use mnar_core::io::{read_input, read_qtable_csv_with_tolerance, QTABLE_HEADER};
use mnar_core::model::{ObservedCellParams, ZMarginParam};
use mnar_core::omega::{
    exact_iv_omega_intervals, exact_iv_posbias_intervals, imperfect_iv_omega_bounds, restricted_psi_bounds, OmegaInterval,
    PsiRestriction,
};
use mnar_core::saturated::psi_bounds;
use mnar_core::sim::ModelSpec;
use mnar_core::{AssumptionKind, AssumptionSpec, CellIndex, CountsTable};
use serde_json::json;

use crate::{write_file, Globals};

pub struct BoundsArgs<'a> {
    pub input: &'a Path,
    pub kind: Option<AssumptionKind>,
    pub t_l: f64,
    pub t_h: f64,
    pub qz: Option<f64>,
    pub sum_tol: f64,
}

/// Empirical cell probabilities. A cell with no units is treated as
/// entirely missing, which leaves its `omega` unconstrained.
pub fn empirical_q(counts: &CountsTable) -> [ObservedCellParams<f64>; 4] {
    counts.cells.map(|c| {
        let n = c.total();
        if n == 0 {
            ObservedCellParams::new_unchecked(0.0, 0.0, 1.0)
        } else {
            let n = n as f64;
            ObservedCellParams::new_unchecked(c.n10 as f64 / n, c.n11 as f64 / n, c.n0dot as f64 / n)
        }
    })
}

/// Admissible `omega` per cell in `CellIndex::ALL` order.
pub fn omega_intervals(spec: &AssumptionSpec, q: &[ObservedCellParams<f64>; 4]) -> [OmegaInterval<f64>; 4] {
    let unit = OmegaInterval::unit();
    let from_iv = |s: [mnar_core::omega::StratumIv<f64>; 2]| {
        let dead = |iv: &mnar_core::omega::StratumIv<f64>| !iv.free.is_feasible();
        let pick = |x: usize, z: usize| {
            if dead(&s[x]) {
                OmegaInterval::Infeasible
            } else if z == 0 {
                s[x].dirac
            } else {
                s[x].free
            }
        };
        [pick(0, 0), pick(0, 1), pick(1, 0), pick(1, 1)]
    };
    match spec.kind {
        AssumptionKind::ExactIv => from_iv(exact_iv_omega_intervals(q)),
        AssumptionKind::ExactIvPosBias => from_iv(exact_iv_posbias_intervals(q)),
        AssumptionKind::ThresholdIv => {
            let (a0, a1) = imperfect_iv_omega_bounds(&q[0], &q[1], spec.t_l, spec.t_h);
            let (b0, b1) = imperfect_iv_omega_bounds(&q[2], &q[3], spec.t_l, spec.t_h);
            [a0, a1, b0, b1]
        }
        AssumptionKind::None | AssumptionKind::LognormalIv | AssumptionKind::LognormalBetaBias => [unit; 4],
    }
}

fn fmt_interval(iv: &OmegaInterval<f64>) -> String {
    match iv.bounds() {
        Some((lo, hi)) => format!("[{lo}, {hi}]"),
        None => "infeasible".into(),
    }
}

pub fn run(g: &Globals, args: BoundsArgs) -> Result<()> {
    let text = std::fs::read_to_string(args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let is_qtable = text.lines().next().is_some_and(|h| h.trim().replace(' ', "") == QTABLE_HEADER);
    let (q, default_qz) = if is_qtable {
        (read_qtable_csv_with_tolerance(text.as_bytes(), args.sum_tol)?, 0.5)
    } else {
        let counts = read_input(text.as_bytes())?.counts();
        let (z0, z1) = counts.zcounts();
        let qz = if z0 + z1 == 0 { 0.5 } else { z1 as f64 / (z0 + z1) as f64 };
        (empirical_q(&counts), qz)
    };
    let qz = args.qz.unwrap_or(default_qz);
    if !(0.0..=1.0).contains(&qz) {
        anyhow::bail!(crate::Usage(format!("qz = {qz} outside [0,1]")));
    }

    let specs: Vec<(String, AssumptionSpec)> = if let Some(kind) = args.kind {
        let spec = AssumptionSpec { kind, t_l: args.t_l, t_h: args.t_h, ..AssumptionSpec::default() };
        spec.validate()?;
        vec![(spec.label(), spec)]
    } else {
        let named: Vec<_> = g
            .config
            .models()?
            .into_iter()
            .filter_map(|m| match m.model {
                ModelSpec::Saturated(s) => Some((m.name, s)),
                _ => None,
            })
            .collect();
        if named.is_empty() {
            [
                AssumptionSpec::none(),
                AssumptionSpec::exact_iv(),
                AssumptionSpec::threshold_iv(args.t_l, args.t_h),
                AssumptionSpec::exact_iv_posbias(),
            ]
            .into_iter()
            .map(|s| (s.label(), s))
            .collect()
        } else {
            named
        }
    };

    let mut out = String::new();
    let mut entries = Vec::new();
    for (name, spec) in &specs {
        let omegas = omega_intervals(spec, &q);
        let psi = match spec.psi_restriction() {
            PsiRestriction::None => Some(psi_bounds(&q, ZMarginParam(qz))),
            r => restricted_psi_bounds(&q, qz, r),
        };
        writeln!(out, "{name}")?;
        for (c, iv) in CellIndex::ALL.iter().zip(&omegas) {
            writeln!(out, "  omega_{} {}", c.label(), fmt_interval(iv))?;
        }
        match psi {
            Some((lo, hi)) => writeln!(out, "  psi [{lo}, {hi}]")?,
            None => writeln!(out, "  psi infeasible")?,
        }
        entries.push(json!({
            "name": name,
            "kind": spec.kind.name(),
            "omega": CellIndex::ALL.iter().zip(&omegas).map(|(c, iv)| json!({
                "cell": c.label(),
                "interval": iv.bounds().map(|(lo, hi)| [lo, hi]),
            })).collect::<Vec<_>>(),
            "psi": psi.map(|(lo, hi)| [lo, hi]),
        }));
    }
    let flags = falsifiability_check(&q, args.t_l, args.t_h);
    writeln!(
        out,
        "feasible exact_iv={} exact_iv_posbias={} threshold_iv={}",
        flags.exact_iv, flags.exact_iv_posbias, flags.threshold_iv
    )?;
    print!("{out}");
    if let Some(dir) = &g.out_explicit {
        let report = json!({ "qz": qz, "bounds": entries, "feasible": flags });
        write_file(dir, "bounds.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
        write_file(dir, "bounds.txt", &out)?;
    }
    Ok(())
}
