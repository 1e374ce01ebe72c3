//! Data-generating processes for the simulation studies.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::heckman::{cell_probs_with_outcome, HeckmanParams};
use crate::model::{CellIndex, CellParams, CountsTable, MissingCellParam, ObservedCellParams, Row, ZMarginParam};
use crate::omega::dirac_map;
use crate::rng::{domain, Streams};
use crate::saturated::{psi, stratum_odds_ratio};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    Heckman,
    Saturated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasDirection {
    Positive,
    Negative,
}

/// Selection coefficients on `X` and `Z`; the intercept is solved for.
pub const GAMMA_X: f64 = 0.3;
pub const GAMMA_Z: f64 = 0.7;

/// Minimum `|log OR|` per stratum when the instrument is meant to fail.
pub const IV_VIOLATION_MARGIN: f64 = 0.2;

/// Cap on whole-configuration redraws in the saturated generator.
pub const MAX_REDRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub target_missing: f64,
    pub iv_holds: bool,
    pub bias: BiasDirection,
    pub beta0: f64,
    pub beta1: f64,
    /// Direct effect of `Z` on `Y` within `X = 0`, cancelled at `X = 1`.
    pub beta2: f64,
    pub rho: f64,
    pub n: usize,
}

impl DgpSpec {
    /// Probit selection model. A failed instrument adds `beta2 = 1.5` and a
    /// negative bias flips `rho` to `+0.5`.
    pub fn heckman(target_missing: f64, iv_holds: bool, bias: BiasDirection) -> Self {
        Self {
            kind: DgpKind::Heckman,
            target_missing,
            iv_holds,
            bias,
            beta0: -0.5,
            beta1: 0.75,
            beta2: if iv_holds { 0.0 } else { 1.5 },
            rho: match bias {
                BiasDirection::Positive => -0.5,
                BiasDirection::Negative => 0.5,
            },
            n: 1000,
        }
    }

    pub fn saturated(target_missing: f64, iv_holds: bool, bias: BiasDirection) -> Self {
        Self { kind: DgpKind::Saturated, ..Self::heckman(target_missing, iv_holds, bias) }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.target_missing) {
            return Err(invalid(format!("target missingness {} outside [0,1)", self.target_missing)));
        }
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(invalid("rho outside (-1,1)"));
        }
        Ok(())
    }
}

/// One simulated dataset. `complete` holds the same units with every
/// outcome revealed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub rows: Vec<Row>,
    pub complete: Vec<Row>,
    pub psi_true: f64,
    /// Population cell parameters.
    pub cells: [CellParams<f64>; 4],
}

impl SimDataset {
    pub fn counts(&self) -> CountsTable {
        CountsTable::from_rows(&self.rows)
    }

    pub fn complete_counts(&self) -> CountsTable {
        CountsTable::from_rows(&self.complete)
    }

    pub fn missing_fraction(&self) -> f64 {
        self.rows.iter().filter(|r| !r.r).count() as f64 / self.rows.len() as f64
    }
}

/// `P(R = 0)` with fair-coin `X` and `Z`.
fn heckman_missing(gamma0: f64) -> f64 {
    let mut m = 0.0;
    for c in CellIndex::ALL {
        let eta = gamma0 + GAMMA_X * f64::from(c.x) + GAMMA_Z * f64::from(c.z);
        m += 0.25 * crate::normal::sf(eta);
    }
    m
}

/// Selection intercept giving marginal missingness `target`, by bisection.
pub fn solve_gamma0(target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(invalid(format!("target missingness {target} outside (0,1)")));
    }
    // Missingness falls as the intercept grows.
    let (mut lo, mut hi) = (-40.0, 40.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if heckman_missing(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Selection-model parameters and the per-cell outcome indices of a spec.
pub fn heckman_population(spec: &DgpSpec) -> Result<(HeckmanParams, [f64; 4])> {
    let gamma0 = if spec.target_missing > 0.0 { solve_gamma0(spec.target_missing)? } else { 40.0 };
    let params = HeckmanParams::new([gamma0, GAMMA_X, GAMMA_Z], [spec.beta0, spec.beta1], spec.rho)?;
    let eta_y = CellIndex::ALL.map(|c| {
        let (x, z) = (f64::from(c.x), f64::from(c.z));
        spec.beta0 + spec.beta1 * x + spec.beta2 * z - spec.beta2 * x * z
    });
    Ok((params, eta_y))
}

pub fn gen_heckman_data(spec: &DgpSpec, seed: u64) -> Result<SimDataset> {
    spec.validate()?;
    let (params, eta_y) = heckman_population(spec)?;
    let cells = cell_probs_with_outcome(&params, eta_y)?.cells;
    let mut rng = Streams::new(seed).rng(&[domain::DGP, 0]);
    let s = (1.0 - spec.rho * spec.rho).sqrt();
    let mut rows = Vec::with_capacity(spec.n);
    let mut complete = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x = u8::from(rng.random::<bool>());
        let z = u8::from(rng.random::<bool>());
        let u: f64 = rng.sample(StandardNormal);
        let v: f64 = rng.sample(StandardNormal);
        let (nu, eps) = (u, spec.rho * u + s * v);
        let r = params.selection_index(x, z) + nu > 0.0;
        let y = eta_y[CellIndex { x, z }.ordinal()] + eps > 0.0;
        rows.push(Row { x, z, r, y: r.then_some(y) });
        complete.push(Row { x, z, r: true, y: Some(y) });
    }
    Ok(SimDataset { rows, complete, psi_true: psi(&cells, ZMarginParam(0.5)), cells })
}

fn bias_ok(cell: &CellParams<f64>, bias: BiasDirection) -> bool {
    if cell.q.q0dot <= 0.0 {
        return true;
    }
    match bias {
        BiasDirection::Positive => cell.missing_data_bias() > 0.0,
        BiasDirection::Negative => cell.missing_data_bias() < 0.0,
    }
}

/// Draws population cell parameters under the flags of `spec`: every cell
/// has missingness exactly `target_missing` with a uniform observed split
/// and uniform `omega`.
pub fn draw_saturated_population<R: Rng>(spec: &DgpSpec, rng: &mut R) -> Result<[CellParams<f64>; 4]> {
    let m = spec.target_missing;
    for _ in 0..MAX_REDRAWS {
        let mut q: [ObservedCellParams<f64>; 4] = std::array::from_fn(|_| {
            let u: f64 = rng.random();
            ObservedCellParams::new_unchecked((1.0 - m) * (1.0 - u), (1.0 - m) * u, m)
        });
        let mut w: [f64; 4] = std::array::from_fn(|_| rng.random());
        if spec.iv_holds {
            let mut ok = true;
            for x in 0..2 {
                if m == 0.0 {
                    // Nothing missing: the instrument forces equal cells.
                    q[2 * x] = q[2 * x + 1];
                    continue;
                }
                match dirac_map(&q[2 * x], &q[2 * x + 1], w[2 * x + 1]) {
                    Some(v) if (0.0..=1.0).contains(&v) => w[2 * x] = v,
                    _ => ok = false,
                }
            }
            if !ok {
                continue;
            }
        }
        let cells: [CellParams<f64>; 4] =
            std::array::from_fn(|i| CellParams::new(CellIndex::ALL[i], q[i], MissingCellParam(w[i])));
        if !spec.iv_holds {
            let far = (0..2).all(|x| {
                let (a, b) = (&cells[2 * x], &cells[2 * x + 1]);
                stratum_odds_ratio(&a.q, a.omega.0, &b.q, b.omega.0)
                    .is_some_and(|or| or.ln().abs() > IV_VIOLATION_MARGIN)
            });
            if !far {
                continue;
            }
        }
        if cells.iter().all(|c| bias_ok(c, spec.bias)) {
            return Ok(cells);
        }
    }
    Err(Error::GeneratorExhausted(MAX_REDRAWS))
}

/// Multinomial rows from fixed population cells with fair-coin `X`, `Z`.
pub fn sample_rows<R: Rng>(cells: &[CellParams<f64>; 4], n: usize, rng: &mut R) -> (Vec<Row>, Vec<Row>) {
    let mut rows = Vec::with_capacity(n);
    let mut complete = Vec::with_capacity(n);
    for _ in 0..n {
        let x = u8::from(rng.random::<bool>());
        let z = u8::from(rng.random::<bool>());
        let p = cells[CellIndex { x, z }.ordinal()].joint();
        let u: f64 = rng.random();
        let k = if u < p[0] {
            0
        } else if u < p[0] + p[1] {
            1
        } else if u < p[0] + p[1] + p[2] {
            2
        } else {
            3
        };
        let (r, y) = (k < 2, k % 2 == 1);
        rows.push(Row { x, z, r, y: r.then_some(y) });
        complete.push(Row { x, z, r: true, y: Some(y) });
    }
    (rows, complete)
}

pub fn gen_saturated_data(spec: &DgpSpec, seed: u64) -> Result<SimDataset> {
    spec.validate()?;
    let streams = Streams::new(seed);
    let cells = draw_saturated_population(spec, &mut streams.rng(&[domain::DGP, 1]))?;
    let (rows, complete) = sample_rows(&cells, spec.n, &mut streams.rng(&[domain::DGP, 2]));
    Ok(SimDataset { rows, complete, psi_true: psi(&cells, ZMarginParam(0.5)), cells })
}

pub fn generate(spec: &DgpSpec, seed: u64) -> Result<SimDataset> {
    match spec.kind {
        DgpKind::Heckman => gen_heckman_data(spec, seed),
        DgpKind::Saturated => gen_saturated_data(spec, seed),
    }
}
