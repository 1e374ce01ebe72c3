//! Bivariate probit selection model.
//!
//! Observation follows `R = 1{C1' gamma + nu > 0}` with `C1 = (1, X, Z)` and
//! the outcome `Y = 1{C2' beta + eps > 0}` with `C2 = (1, X)`, where
//! `(nu, eps)` is standard bivariate normal with correlation `rho`. `Z`
//! shifts selection only, so it acts as an instrument.

pub mod bvn;
pub mod gibbs;
pub mod truncnorm;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{CellIndex, CellParams};
use crate::normal;

pub use gibbs::{gibbs_step, heckman_fit, GibbsConfig, HeckmanData, HeckmanFit, HeckmanState};
pub use truncnorm::truncated_normal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeckmanParams {
    /// Selection equation: intercept, `X`, `Z`.
    pub gamma: [f64; 3],
    /// Outcome equation: intercept, `X`.
    pub beta: [f64; 2],
    pub rho: f64,
}

impl HeckmanParams {
    pub fn new(gamma: [f64; 3], beta: [f64; 2], rho: f64) -> Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(invalid(format!("rho {rho} outside (-1,1)")));
        }
        if gamma.iter().chain(&beta).any(|v| !v.is_finite()) {
            return Err(invalid("coefficients must be finite"));
        }
        Ok(Self { gamma, beta, rho })
    }

    /// `Phi(beta0 + beta1) - Phi(beta0)`.
    pub fn psi(&self) -> f64 {
        normal::cdf(self.beta[0] + self.beta[1]) - normal::cdf(self.beta[0])
    }

    pub fn selection_index(&self, x: u8, z: u8) -> f64 {
        self.gamma[0] + self.gamma[1] * f64::from(x) + self.gamma[2] * f64::from(z)
    }

    pub fn outcome_index(&self, x: u8) -> f64 {
        self.beta[0] + self.beta[1] * f64::from(x)
    }
}

/// Population cell parameters implied by a selection model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeckmanCellProbs {
    pub cells: [CellParams<f64>; 4],
    /// `P(R = 0)` with `X` and `Z` independent fair coins.
    pub missing: f64,
}

/// `(p_{1,0}, p_{1,1}, p_{0,0}, p_{0,1})` indexed by `(r, y)` for one cell.
pub fn selection_joint(eta_r: f64, eta_y: f64, rho: f64) -> [f64; 4] {
    let both = bvn::bvn_cdf(eta_r, eta_y, rho);
    let pr = normal::cdf(eta_r);
    let py = normal::cdf(eta_y);
    let p10 = (pr - both).max(0.0);
    let p01 = (py - both).max(0.0);
    let p00 = (1.0 - pr - py + both).max(0.0);
    [p10, both, p00, p01]
}

/// Cell parameters with a general outcome index per cell, used to build
/// models where `Z` also enters the outcome.
pub fn cell_probs_with_outcome(params: &HeckmanParams, eta_y: [f64; 4]) -> Result<HeckmanCellProbs> {
    let mut missing = 0.0;
    let mut cells = [CellParams::new(
        CellIndex::ALL[0],
        crate::model::ObservedCellParams::new_unchecked(0.0, 0.0, 0.0),
        crate::model::MissingCellParam(0.0),
    ); 4];
    for (i, idx) in CellIndex::ALL.into_iter().enumerate() {
        let p = selection_joint(params.selection_index(idx.x, idx.z), eta_y[i], params.rho);
        let s: f64 = p.iter().sum();
        let p = p.map(|v| v / s);
        cells[i] = CellParams::from_joint(idx, p, 0.5)?;
        missing += 0.25 * (p[2] + p[3]);
    }
    Ok(HeckmanCellProbs { cells, missing })
}

pub fn heckman_cell_probs(params: &HeckmanParams) -> Result<HeckmanCellProbs> {
    let eta = CellIndex::ALL.map(|c| params.outcome_index(c.x));
    cell_probs_with_outcome(params, eta)
}
