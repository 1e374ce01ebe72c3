//! Domain types of the saturated model.
//!
//! The joint distribution of `(Y, R)` inside each `(X, Z)` cell is carried in
//! the observed/unobserved split: `q = (P(Y=0,R=1), P(Y=1,R=1), P(R=0))`
//! is informed by data, while `omega = P(Y=1 | R=0)` is not.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// One of the four `(x, z)` strata. Ordered by `x`, then `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub x: u8,
    pub z: u8,
}

impl CellIndex {
    pub const ALL: [CellIndex; 4] = [
        CellIndex { x: 0, z: 0 },
        CellIndex { x: 0, z: 1 },
        CellIndex { x: 1, z: 0 },
        CellIndex { x: 1, z: 1 },
    ];

    pub fn new(x: u8, z: u8) -> Result<Self> {
        if x > 1 || z > 1 {
            return Err(invalid(format!("cell index ({x},{z}) is not binary")));
        }
        Ok(Self { x, z })
    }

    /// Position in [`CellIndex::ALL`].
    pub fn ordinal(self) -> usize {
        usize::from(self.x) * 2 + usize::from(self.z)
    }

    pub fn label(self) -> String {
        format!("{}{}", self.x, self.z)
    }
}

/// Observed-data simplex of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedCellParams<T> {
    pub q10: T,
    pub q11: T,
    pub q0dot: T,
}

impl<T: Scalar> ObservedCellParams<T> {
    pub fn new(q10: T, q11: T, q0dot: T) -> Result<Self> {
        let zero = T::zero();
        let one = T::one();
        if [q10, q11, q0dot].iter().any(|&v| v < zero || v > one) {
            return Err(invalid(format!("cell probabilities {q10:?},{q11:?},{q0dot:?} outside [0,1]")));
        }
        let sum = q10 + q11 + q0dot;
        if sum.abs_diff(one) > T::from_f64(1e-12) {
            return Err(invalid(format!("cell probabilities sum to {sum:?}, not 1")));
        }
        Ok(Self { q10, q11, q0dot })
    }

    /// Builds the simplex without validation. Callers guarantee the invariants.
    pub fn new_unchecked(q10: T, q11: T, q0dot: T) -> Self {
        Self { q10, q11, q0dot }
    }

    /// `P(Y=1 | X, Z)` once the missing rows are filled in at rate `omega`.
    #[inline]
    pub fn outcome_prob(&self, omega: T) -> T {
        self.q11 + self.q0dot * omega
    }

    /// `P(Y=1 | R=1)` in this cell, or zero when nothing is observed.
    pub fn observed_rate(&self) -> T {
        let observed = T::one() - self.q0dot;
        if observed > T::zero() {
            self.q11 / observed
        } else {
            T::zero()
        }
    }
}

/// Share of the missing rows with `Y = 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct MissingCellParam<T>(pub T);

impl<T: Scalar> MissingCellParam<T> {
    pub fn new(omega: T) -> Result<Self> {
        if omega < T::zero() || omega > T::one() {
            return Err(invalid(format!("omega {omega:?} outside [0,1]")));
        }
        Ok(Self(omega))
    }

    pub fn value(self) -> T {
        self.0
    }
}

/// Full parameterisation of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams<T> {
    pub index: CellIndex,
    pub q: ObservedCellParams<T>,
    pub omega: MissingCellParam<T>,
}

impl<T: Scalar> CellParams<T> {
    pub fn new(index: CellIndex, q: ObservedCellParams<T>, omega: MissingCellParam<T>) -> Self {
        Self { index, q, omega }
    }

    /// `(p_{1,0}, p_{1,1}, p_{0,0}, p_{0,1})`, indexed by `(r, y)`.
    pub fn joint(&self) -> [T; 4] {
        let w = self.omega.0;
        [
            self.q.q10,
            self.q.q11,
            self.q.q0dot * (T::one() - w),
            self.q.q0dot * w,
        ]
    }

    /// Inverse of [`CellParams::joint`]. When the cell has no missing mass the
    /// split is unidentified and `omega_if_degenerate` is used.
    pub fn from_joint(index: CellIndex, p: [T; 4], omega_if_degenerate: T) -> Result<Self> {
        let missing = p[2] + p[3];
        let omega = if missing > T::zero() { p[3] / missing } else { omega_if_degenerate };
        Ok(Self {
            index,
            q: ObservedCellParams::new(p[0], p[1], missing)?,
            omega: MissingCellParam::new(omega)?,
        })
    }

    pub fn outcome_prob(&self) -> T {
        self.q.outcome_prob(self.omega.0)
    }

    /// `P(Y=1 | R=0) - P(Y=1 | R=1)`; positive means the missing rows carry
    /// more successes than the observed ones.
    pub fn missing_data_bias(&self) -> T {
        self.omega.0 - self.q.observed_rate()
    }
}

/// `P(Z = 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ZMarginParam<T>(pub T);

impl<T: Scalar> ZMarginParam<T> {
    pub fn new(qz: T) -> Result<Self> {
        if qz < T::zero() || qz > T::one() {
            return Err(invalid(format!("qz {qz:?} outside [0,1]")));
        }
        Ok(Self(qz))
    }
}

/// All cell parameters plus the instrument margin: one point of the posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointDraw<T> {
    pub cells: [CellParams<T>; 4],
    pub qz: ZMarginParam<T>,
}

impl<T: Scalar> JointDraw<T> {
    pub fn cell(&self, x: u8, z: u8) -> &CellParams<T> {
        &self.cells[usize::from(x) * 2 + usize::from(z)]
    }

    pub fn observed(&self) -> [ObservedCellParams<T>; 4] {
        self.cells.map(|c| c.q)
    }

    pub fn omegas(&self) -> [T; 4] {
        self.cells.map(|c| c.omega.0)
    }
}

/// Observed counts for one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CellCounts {
    pub n10: u64,
    pub n11: u64,
    pub n0dot: u64,
}

impl CellCounts {
    pub fn total(&self) -> u64 {
        self.n10 + self.n11 + self.n0dot
    }
}

/// Observed multinomial counts for the four strata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountsTable {
    pub cells: [CellCounts; 4],
}

impl CountsTable {
    pub fn new(cells: [CellCounts; 4]) -> Self {
        Self { cells }
    }

    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn cell(&self, index: CellIndex) -> &CellCounts {
        &self.cells[index.ordinal()]
    }

    /// `(#{Z=0}, #{Z=1})`.
    pub fn zcounts(&self) -> (u64, u64) {
        (
            self.cells[0].total() + self.cells[2].total(),
            self.cells[1].total() + self.cells[3].total(),
        )
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().map(CellCounts::total).sum()
    }

    pub fn missing(&self) -> u64 {
        self.cells.iter().map(|c| c.n0dot).sum()
    }
}

/// One unit of row-level data. `y` is `None` exactly when `r` is false.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub x: u8,
    pub z: u8,
    pub r: bool,
    pub y: Option<bool>,
}

impl Row {
    pub fn new(x: u8, z: u8, r: bool, y: Option<bool>) -> Result<Self> {
        CellIndex::new(x, z)?;
        if r != y.is_some() {
            return Err(invalid("outcome must be present exactly when observed"));
        }
        Ok(Self { x, z, r, y })
    }

    pub fn cell(&self) -> CellIndex {
        CellIndex { x: self.x, z: self.z }
    }
}

impl CountsTable {
    /// Aggregates rows into cell counts.
    pub fn from_rows(rows: &[Row]) -> Self {
        let mut t = Self::zeros();
        for row in rows {
            let c = &mut t.cells[row.cell().ordinal()];
            match row.y {
                None => c.n0dot += 1,
                Some(false) => c.n10 += 1,
                Some(true) => c.n11 += 1,
            }
        }
        t
    }
}

impl CountsTable {
    /// One row per counted unit, cell by cell: `Y = 0`, then `Y = 1`, then missing.
    pub fn to_rows(&self) -> Vec<Row> {
        let mut rows = Vec::with_capacity(self.total() as usize);
        for (c, n) in CellIndex::ALL.iter().zip(&self.cells) {
            let (x, z) = (c.x, c.z);
            rows.extend((0..n.n10).map(|_| Row { x, z, r: true, y: Some(false) }));
            rows.extend((0..n.n11).map(|_| Row { x, z, r: true, y: Some(true) }));
            rows.extend((0..n.n0dot).map(|_| Row { x, z, r: false, y: None }));
        }
        rows
    }
}

/// Dirichlet pseudo-counts for `(q10, q11, q0dot)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletHyper {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl Default for DirichletHyper {
    /// `Dir(1,1,1,1)` on the four `(R, Y)` outcomes collapses to `(1,1,2)`.
    fn default() -> Self {
        Self { a1: 1.0, a2: 1.0, a3: 2.0 }
    }
}

impl DirichletHyper {
    pub fn new(a1: f64, a2: f64, a3: f64) -> Result<Self> {
        if !(a1 > 0.0 && a2 > 0.0 && a3 > 0.0) || ![a1, a2, a3].iter().all(|v| v.is_finite()) {
            return Err(invalid(format!("Dirichlet pseudo-counts ({a1},{a2},{a3}) must be positive")));
        }
        Ok(Self { a1, a2, a3 })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.a1, self.a2, self.a3]
    }

    pub fn mean(&self) -> [f64; 3] {
        let s = self.a1 + self.a2 + self.a3;
        [self.a1 / s, self.a2 / s, self.a3 / s]
    }
}

/// Accepted posterior draws and the attempt bookkeeping that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub draws: Vec<JointDraw<f64>>,
    /// Equals `draws.len()`.
    pub accepted: u64,
    /// Joint attempts equivalent to the per-stratum work, `accepted / rate`.
    pub attempted: u64,
    pub seed: u64,
    pub tally: StratumTally,
}

pub use crate::error::StratumTally;

impl PosteriorDraws {
    pub(crate) fn from_parts(draws: Vec<JointDraw<f64>>, tally: StratumTally, seed: u64) -> Self {
        let accepted = draws.len() as u64;
        let rate = tally.joint_rate();
        let attempted = if rate > 0.0 {
            ((accepted as f64 / rate).round() as u64).max(accepted)
        } else {
            accepted
        };
        Self { draws, accepted, attempted, seed, tally }
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.tally.joint_rate()
    }

    pub fn psi(&self) -> Vec<f64> {
        self.draws.iter().map(crate::saturated::psi_of).collect()
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;
    use proptest::prelude::*;

    #[test]
    fn cell_order_is_x_then_z() {
        let mut sorted = CellIndex::ALL;
        sorted.sort();
        assert_eq!(sorted, CellIndex::ALL);
        for (i, c) in CellIndex::ALL.iter().enumerate() {
            assert_eq!(c.ordinal(), i);
        }
        assert!(CellIndex::new(2, 0).is_err());
    }

    #[test]
    fn observed_params_validate() {
        assert!(ObservedCellParams::new(0.5, 0.5, 0.1).is_err());
        assert!(ObservedCellParams::new(-0.1, 0.6, 0.5).is_err());
        assert!(ObservedCellParams::new(rat(47, 101), rat(6, 101), rat(48, 101)).is_ok());
        assert!(ObservedCellParams::new(rat(47, 100), rat(6, 100), rat(48, 100)).is_err());
    }

    #[test]
    fn exact_joint_round_trip() {
        let c = CellParams::new(
            CellIndex::ALL[0],
            ObservedCellParams::new(rat(47, 101), rat(6, 101), rat(48, 101)).unwrap(),
            MissingCellParam::new(rat(37, 48)).unwrap(),
        );
        let p = c.joint();
        assert_eq!(p, [rat(47, 101), rat(6, 101), rat(11, 101), rat(37, 101)]);
        assert_eq!(CellParams::from_joint(c.index, p, rat(0, 1)).unwrap(), c);
    }

    #[test]
    fn zcounts_partition_total() {
        let t = CountsTable::new([
            CellCounts { n10: 1, n11: 2, n0dot: 3 },
            CellCounts { n10: 4, n11: 5, n0dot: 6 },
            CellCounts { n10: 7, n11: 8, n0dot: 9 },
            CellCounts { n10: 10, n11: 11, n0dot: 12 },
        ]);
        assert_eq!(t.zcounts(), (6 + 24, 15 + 33));
        assert_eq!(t.zcounts().0 + t.zcounts().1, t.total());
        assert_eq!(t.missing(), 30);
    }

    #[test]
    fn rows_aggregate() {
        let rows = [
            Row::new(0, 0, true, Some(true)).unwrap(),
            Row::new(0, 0, false, None).unwrap(),
            Row::new(1, 1, true, Some(false)).unwrap(),
        ];
        let t = CountsTable::from_rows(&rows);
        assert_eq!(t.cells[0], CellCounts { n10: 0, n11: 1, n0dot: 1 });
        assert_eq!(t.cells[3], CellCounts { n10: 1, n11: 0, n0dot: 0 });
        assert!(Row::new(0, 0, false, Some(true)).is_err());
        assert!(Row::new(0, 2, true, Some(true)).is_err());
    }

    proptest! {
        #[test]
        fn counts_rows_round_trip(n in proptest::array::uniform12(0u64..30)) {
            let t = CountsTable::new(std::array::from_fn(|i| CellCounts { n10: n[3 * i], n11: n[3 * i + 1], n0dot: n[3 * i + 2] }));
            let rows = t.to_rows();
            prop_assert_eq!(rows.len() as u64, t.total());
            prop_assert_eq!(CountsTable::from_rows(&rows), t);
        }

        #[test]
        fn joint_reconstruction_is_identity(
            a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, w in 0.0f64..1.0
        ) {
            let s = a + b + c + 1e-9;
            let q = ObservedCellParams::new(a / s, b / s, 1.0 - a / s - b / s).unwrap();
            let cell = CellParams::new(CellIndex::ALL[3], q, MissingCellParam(w));
            let p = cell.joint();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let back = CellParams::from_joint(cell.index, p, w).unwrap();
            prop_assert!((back.q.q10 - q.q10).abs() < 1e-12);
            prop_assert!((back.q.q11 - q.q11).abs() < 1e-12);
            prop_assert!((back.q.q0dot - q.q0dot).abs() < 1e-12);
            if q.q0dot > 1e-6 {
                prop_assert!((back.omega.0 - w).abs() < 1e-9);
            }
        }
    }
}
