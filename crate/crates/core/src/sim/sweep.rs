//! Prior acceptance rate as a function of the missing-mass pseudo-count.

use serde::{Deserialize, Serialize};

use crate::assumption::AssumptionSpec;
use crate::error::{invalid, Result};
use crate::evidence::prior_acceptance_rate;
use crate::model::DirichletHyper;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub spec: String,
    pub alpha3: f64,
    pub ar: f64,
    pub se: f64,
}

/// The hyperparameter used for a grid value: `(1, 1, alpha3 + 1)`. At
/// `alpha3 = 1` this is the default prior.
pub fn sweep_hyper(alpha3: f64) -> Result<DirichletHyper> {
    DirichletHyper::new(1.0, 1.0, alpha3 + 1.0)
}

/// Prior acceptance rates for every `(spec, alpha3)` pair, specs outermost.
pub fn prior_ar_sweep(grid: &[f64], specs: &[AssumptionSpec], attempts: u64, seed: u64) -> Result<Vec<SweepPoint>> {
    if let Some(g) = grid.iter().find(|&&g| !(g >= 1.0)) {
        return Err(invalid(format!("grid value {g} below 1")));
    }
    let mut out = Vec::with_capacity(grid.len() * specs.len());
    for spec in specs {
        for &a3 in grid {
            let s = spec.with_hyper(sweep_hyper(a3)?);
            let r = prior_acceptance_rate(&s, attempts, seed)?;
            out.push(SweepPoint { spec: spec.label(), alpha3: a3, ar: r.rate, se: r.se });
        }
    }
    Ok(out)
}

/// `spec,alpha3,ar,se` rows.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("spec,alpha3,ar,se\n");
    for p in points {
        s += &format!("{},{},{},{}\n", p.spec, p.alpha3, p.ar, p.se);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_validated_and_ordered() {
        assert!(prior_ar_sweep(&[0.5], &[AssumptionSpec::exact_iv()], 10_000, 1).is_err());
        assert!(prior_ar_sweep(&[1.0], &[AssumptionSpec::exact_iv()], 0, 1).is_err());
        let pts = prior_ar_sweep(&[1.0, 3.0], &[AssumptionSpec::exact_iv(), AssumptionSpec::none()], 10_000, 1).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[1].alpha3, 3.0);
        assert_eq!(pts[2].ar, 1.0);
        assert!(sweep_csv(&pts).starts_with("spec,alpha3,ar,se\nexact_iv,1,"));
    }
}
