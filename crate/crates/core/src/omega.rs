//! Closed-form restrictions on the unidentified `omega` parameters.
//!
//! Within a treatment stratum `x` the exact instrument forces
//! `P(Y=1|x,z=0) = P(Y=1|x,z=1)`, which pins `omega_{x,0}` to an affine image
//! of `omega_{x,1}`. The free parameter is confined to the interval on which
//! that image stays inside `[0,1]`; the positive-bias assumption raises its
//! lower end. The imperfect instrument only requires the stratum odds ratio
//! to lie in `[t_l, t_h]` and yields rectangular projections.

use serde::{Deserialize, Serialize};

use crate::model::ObservedCellParams;
use crate::scalar::Scalar;

/// A closed sub-interval of `[0,1]`, or the empty set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OmegaInterval<T> {
    Feasible { lo: T, hi: T },
    Infeasible,
}

impl<T: Scalar> OmegaInterval<T> {
    /// Clips `[lo, hi]` to the unit interval; empty when the result inverts.
    pub fn clipped(lo: T, hi: T) -> Self {
        let lo = lo.max_of(T::zero());
        let hi = hi.min_of(T::one());
        if lo > hi {
            Self::Infeasible
        } else {
            Self::Feasible { lo, hi }
        }
    }

    pub fn unit() -> Self {
        Self::Feasible { lo: T::zero(), hi: T::one() }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Self::Feasible { .. })
    }

    pub fn bounds(&self) -> Option<(T, T)> {
        match *self {
            Self::Feasible { lo, hi } => Some((lo, hi)),
            Self::Infeasible => None,
        }
    }

    pub fn contains(&self, w: T) -> bool {
        self.bounds().is_some_and(|(lo, hi)| lo <= w && w <= hi)
    }

    pub fn width(&self) -> T {
        self.bounds().map_or(T::zero(), |(lo, hi)| hi - lo)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        match (self.bounds(), other.bounds()) {
            (Some((a, b)), Some((c, d))) => Self::clipped(a.max_of(c), b.min_of(d)),
            _ => Self::Infeasible,
        }
    }

    /// Whether `other` lies inside `self` (the empty set lies in everything).
    pub fn contains_interval(&self, other: &Self) -> bool {
        match (self.bounds(), other.bounds()) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some((a, b)), Some((c, d))) => a <= c && d <= b,
        }
    }

    pub fn to_f64(&self) -> OmegaInterval<f64> {
        match *self {
            Self::Feasible { lo, hi } => OmegaInterval::Feasible { lo: lo.to_f64(), hi: hi.to_f64() },
            Self::Infeasible => OmegaInterval::Infeasible,
        }
    }
}

/// The exact-instrument map `omega_{x,1} -> omega_{x,0}` of one stratum.
/// `None` when the `(x,0)` cell has no missing mass, in which case its
/// `omega` does not enter the model at all.
pub fn dirac_map<T: Scalar>(q_z0: &ObservedCellParams<T>, q_z1: &ObservedCellParams<T>, omega_z1: T) -> Option<T> {
    if q_z0.q0dot > T::zero() {
        Some((q_z1.q11 - q_z0.q11 + q_z1.q0dot * omega_z1) / q_z0.q0dot)
    } else {
        None
    }
}

/// `{w : lo_num <= slope * w <= hi_num}` intersected with `[0,1]`.
fn affine_preimage<T: Scalar>(lo_num: T, hi_num: T, slope: T) -> OmegaInterval<T> {
    if slope > T::zero() {
        OmegaInterval::clipped(lo_num / slope, hi_num / slope)
    } else if lo_num <= T::zero() && T::zero() <= hi_num {
        OmegaInterval::unit()
    } else {
        OmegaInterval::Infeasible
    }
}

/// Exact-instrument restriction for one stratum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumIv<T> {
    /// Admissible `omega_{x,1}`.
    pub free: OmegaInterval<T>,
    /// Image of `free` under [`dirac_map`]: the admissible `omega_{x,0}`.
    pub dirac: OmegaInterval<T>,
}

impl<T: Scalar> StratumIv<T> {
    fn from_free(q_z0: &ObservedCellParams<T>, q_z1: &ObservedCellParams<T>, free: OmegaInterval<T>) -> Self {
        let dirac = match free.bounds() {
            None => OmegaInterval::Infeasible,
            Some((lo, hi)) => match (dirac_map(q_z0, q_z1, lo), dirac_map(q_z0, q_z1, hi)) {
                (Some(a), Some(b)) => OmegaInterval::clipped(a, b),
                _ => OmegaInterval::unit(),
            },
        };
        Self { free, dirac }
    }
}

/// Per-stratum exact-instrument intervals, indexed by `x`.
pub fn exact_iv_omega_intervals<T: Scalar>(q: &[ObservedCellParams<T>; 4]) -> [StratumIv<T>; 2] {
    [0usize, 1].map(|x| {
        let (q0, q1) = (&q[2 * x], &q[2 * x + 1]);
        let d = q0.q11 - q1.q11;
        StratumIv::from_free(q0, q1, affine_preimage(d, d + q0.q0dot, q1.q0dot))
    })
}

/// Smallest `omega` with `P(Y=1|R=0) >= P(Y=1|R=1)` in the cell.
pub fn posbias_omega_floor<T: Scalar>(q: &ObservedCellParams<T>) -> T {
    let observed = T::one() - q.q0dot;
    if observed > T::zero() {
        q.q11 / observed
    } else {
        T::zero()
    }
}

/// Exact instrument combined with positive bias in all four cells.
pub fn exact_iv_posbias_intervals<T: Scalar>(q: &[ObservedCellParams<T>; 4]) -> [StratumIv<T>; 2] {
    let base = exact_iv_omega_intervals(q);
    [0usize, 1].map(|x| {
        let (q0, q1) = (&q[2 * x], &q[2 * x + 1]);
        let d = q0.q11 - q1.q11;
        // omega_{x,0} >= its floor, pulled back through the map.
        let propagated = affine_preimage(posbias_omega_floor(q0) * q0.q0dot + d, q1.q0dot, q1.q0dot);
        let direct = OmegaInterval::clipped(posbias_omega_floor(q1), T::one());
        StratumIv::from_free(q0, q1, base[x].free.intersect(&propagated).intersect(&direct))
    })
}

/// `p1` with `OR(p1 vs p0) = t`.
fn solve_p1<T: Scalar>(p0: T, t: T) -> T {
    t * p0 / (T::one() - p0 + t * p0)
}

/// `p0` with `OR(p1 vs p0) = t`.
fn solve_p0<T: Scalar>(p1: T, t: T) -> T {
    p1 / (t * (T::one() - p1) + p1)
}

/// `inf {w in [0,1] : q11 + c w >= p}` as an unclipped number; above 1 when empty.
fn lower_for<T: Scalar>(p: T, q11: T, c: T) -> T {
    if c > T::zero() {
        (p - q11) / c
    } else if q11 >= p {
        T::zero()
    } else {
        T::two()
    }
}

/// `sup {w in [0,1] : q11 + c w <= p}` as an unclipped number; below 0 when empty.
fn upper_for<T: Scalar>(p: T, q11: T, c: T) -> T {
    if c > T::zero() {
        (p - q11) / c
    } else if q11 <= p {
        T::one()
    } else {
        T::zero() - T::one()
    }
}

/// Projections of `{t_l <= OR(Y,Z|X=x) <= t_h}` onto `omega_{x,0}` and
/// `omega_{x,1}`. The odds ratio increases in `omega_{x,1}` and decreases in
/// `omega_{x,0}`, so each endpoint solves the boundary equation with the
/// other parameter pinned at 0 or 1.
pub fn imperfect_iv_omega_bounds<T: Scalar>(
    q_z0: &ObservedCellParams<T>,
    q_z1: &ObservedCellParams<T>,
    t_l: T,
    t_h: T,
) -> (OmegaInterval<T>, OmegaInterval<T>) {
    let p0_lo = q_z0.q11;
    let p0_hi = q_z0.q11 + q_z0.q0dot;
    let p1_lo = q_z1.q11;
    let p1_hi = q_z1.q11 + q_z1.q0dot;

    let w1 = OmegaInterval::clipped(
        lower_for(solve_p1(p0_lo, t_l), q_z1.q11, q_z1.q0dot),
        upper_for(solve_p1(p0_hi, t_h), q_z1.q11, q_z1.q0dot),
    );
    let w0 = OmegaInterval::clipped(
        lower_for(solve_p0(p1_lo, t_h), q_z0.q11, q_z0.q0dot),
        upper_for(solve_p0(p1_hi, t_l), q_z0.q11, q_z0.q0dot),
    );
    if w0.is_feasible() && w1.is_feasible() {
        (w0, w1)
    } else {
        (OmegaInterval::Infeasible, OmegaInterval::Infeasible)
    }
}

/// Restrictions with a closed-form identification region for the risk
/// difference. The soft priors place mass everywhere and share the
/// unrestricted region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiRestriction<T> {
    None,
    ExactIv,
    ExactIvPosBias,
    Threshold { t_l: T, t_h: T },
}

/// `sign(OR(p1 vs p0) - t)` without dividing, so boundary probabilities are fine.
fn or_cmp<T: Scalar>(p0: T, p1: T, t: T) -> std::cmp::Ordering {
    let lhs = p1 * (T::one() - p0);
    let rhs = t * p0 * (T::one() - p1);
    lhs.partial_cmp(&rhs).unwrap_or(std::cmp::Ordering::Equal)
}

/// Range of `P(Y=1|X=x)` over the admissible `omega`s of stratum `x`.
/// The arm probability `(1-qz) p0 + qz p1` increases in both cell
/// probabilities, so the optimum sits at a corner of the `(p0, p1)` box or
/// where that corner's odds-ratio boundary meets the box edge.
pub fn arm_outcome_range<T: Scalar>(
    q: &[ObservedCellParams<T>; 4],
    x: usize,
    qz: T,
    restriction: PsiRestriction<T>,
) -> Option<(T, T)> {
    let (q0, q1) = (&q[2 * x], &q[2 * x + 1]);
    let arm = |p0: T, p1: T| (T::one() - qz) * p0 + qz * p1;
    let free_range = |s: StratumIv<T>| {
        let (lo, hi) = s.free.bounds()?;
        Some((q1.outcome_prob(lo), q1.outcome_prob(hi)))
    };
    let (p0_lo, p0_hi) = (q0.q11, q0.q11 + q0.q0dot);
    let (p1_lo, p1_hi) = (q1.q11, q1.q11 + q1.q0dot);
    match restriction {
        PsiRestriction::None => Some((arm(p0_lo, p1_lo), arm(p0_hi, p1_hi))),
        // Both cells share one conditional probability.
        PsiRestriction::ExactIv => free_range(exact_iv_omega_intervals(q)[x]),
        PsiRestriction::ExactIvPosBias => free_range(exact_iv_posbias_intervals(q)[x]),
        PsiRestriction::Threshold { t_l, t_h } => {
            if !imperfect_iv_omega_bounds(q0, q1, t_l, t_h).0.is_feasible() {
                return None;
            }
            use std::cmp::Ordering::{Greater, Less};
            let clamp = |v: T, lo: T, hi: T| v.max_of(lo).min_of(hi);
            let (a0, a1) = if or_cmp(p0_lo, p1_lo, t_h) == Greater {
                (clamp(solve_p0(p1_lo, t_h), p0_lo, p0_hi), p1_lo)
            } else if or_cmp(p0_lo, p1_lo, t_l) == Less {
                (p0_lo, clamp(solve_p1(p0_lo, t_l), p1_lo, p1_hi))
            } else {
                (p0_lo, p1_lo)
            };
            let (b0, b1) = if or_cmp(p0_hi, p1_hi, t_h) == Greater {
                (p0_hi, clamp(solve_p1(p0_hi, t_h), p1_lo, p1_hi))
            } else if or_cmp(p0_hi, p1_hi, t_l) == Less {
                (clamp(solve_p0(p1_hi, t_l), p0_lo, p0_hi), p1_hi)
            } else {
                (p0_hi, p1_hi)
            };
            Some((arm(a0, a1), arm(b0, b1)))
        }
    }
}

/// Identification region `[lo, hi]` of the risk difference under a
/// restriction, or `None` when the observed distribution contradicts it.
pub fn restricted_psi_bounds<T: Scalar>(
    q: &[ObservedCellParams<T>; 4],
    qz: T,
    restriction: PsiRestriction<T>,
) -> Option<(T, T)> {
    let (c_lo, c_hi) = arm_outcome_range(q, 0, qz, restriction)?;
    let (t_lo, t_hi) = arm_outcome_range(q, 1, qz, restriction)?;
    Some((t_lo - c_hi, t_hi - c_lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;
    use num_rational::Rational64;
    use proptest::prelude::*;

    fn oc(a: Rational64, b: Rational64, c: Rational64) -> ObservedCellParams<Rational64> {
        // The example rows are rounded and need not sum to exactly 1.
        ObservedCellParams::new_unchecked(a, b, c)
    }

    fn worked_example1() -> [ObservedCellParams<Rational64>; 4] {
        [
            oc(rat(47, 100), rat(6, 100), rat(48, 100)),
            oc(rat(54, 100), rat(29, 100), rat(16, 100)),
            oc(rat(29, 100), rat(28, 100), rat(43, 100)),
            oc(rat(38, 100), rat(49, 100), rat(12, 100)),
        ]
    }

    fn worked_example2() -> [ObservedCellParams<f64>; 4] {
        [
            ObservedCellParams::new_unchecked(0.49, 0.14, 0.36),
            ObservedCellParams::new_unchecked(0.50, 0.23, 0.28),
            ObservedCellParams::new_unchecked(0.31, 0.22, 0.46),
            ObservedCellParams::new_unchecked(0.27, 0.24, 0.49),
        ]
    }

    fn or_at(q0: &ObservedCellParams<f64>, w0: f64, q1: &ObservedCellParams<f64>, w1: f64) -> f64 {
        let p0 = q0.outcome_prob(w0);
        let p1 = q1.outcome_prob(w1);
        p1 * (1.0 - p0) / ((1.0 - p1) * p0)
    }

    #[test]
    fn exact_iv_worked_control_stratum() {
        let q = worked_example1();
        let s = exact_iv_omega_intervals(&q)[0];
        assert_eq!(s.free, OmegaInterval::Feasible { lo: rat(0, 1), hi: rat(1, 1) });
        assert_eq!(s.dirac, OmegaInterval::Feasible { lo: rat(23, 48), hi: rat(39, 48) });
        assert_eq!(rat(39, 48), rat(8125, 10000));
        // The map keeps the stratum odds ratio at exactly 1.
        for w in [rat(0, 1), rat(1, 3), rat(1, 1)] {
            let w0 = dirac_map(&q[0], &q[1], w).unwrap();
            assert_eq!(q[0].outcome_prob(w0), q[1].outcome_prob(w));
        }
    }

    #[test]
    fn exact_iv_symmetric_cells() {
        let c = ObservedCellParams::new(0.3, 0.2, 0.5).unwrap();
        let s = exact_iv_omega_intervals(&[c; 4]);
        assert_eq!(s[1].free, OmegaInterval::unit());
        assert_eq!(dirac_map(&c, &c, 0.37), Some(0.37));
    }

    #[test]
    fn exact_iv_gap_beyond_missing_mass_is_infeasible() {
        let q0 = ObservedCellParams::new(0.85, 0.1, 0.05).unwrap();
        let q1 = ObservedCellParams::new(0.05, 0.9, 0.05).unwrap();
        let s = exact_iv_omega_intervals(&[q0, q1, q0, q0]);
        assert_eq!(s[0].free, OmegaInterval::Infeasible);
        assert_eq!(s[0].dirac, OmegaInterval::Infeasible);
        assert!(s[1].free.is_feasible());
    }

    #[test]
    fn exact_iv_without_missing_mass_in_free_cell() {
        let q0 = ObservedCellParams::new(0.5, 0.2, 0.3).unwrap();
        let q1 = ObservedCellParams::new(0.6, 0.4, 0.0).unwrap();
        // Needs 0.2 + 0.3 w0 = 0.4, satisfiable, so omega_{x,1} is unrestricted.
        let s = exact_iv_omega_intervals(&[q0, q1, q0, q0])[0];
        assert_eq!(s.free, OmegaInterval::unit());
        let q1 = ObservedCellParams::new(0.0, 1.0, 0.0).unwrap();
        assert_eq!(exact_iv_omega_intervals(&[q0, q1, q0, q0])[0].free, OmegaInterval::Infeasible);
    }

    #[test]
    fn posbias_floor_examples() {
        let q = worked_example2();
        assert!((posbias_omega_floor(&q[3]) - 0.24 / 0.51).abs() < 1e-15);
        assert!((posbias_omega_floor(&q[3]) - 0.4706).abs() < 1e-4);
        assert_eq!(posbias_omega_floor(&ObservedCellParams::new(0.6, 0.0, 0.4).unwrap()), 0.0);
        assert_eq!(posbias_omega_floor(&ObservedCellParams::new(0.5, 0.5, 0.0).unwrap()), 0.5);
        assert_eq!(posbias_omega_floor(&ObservedCellParams::new(0.0, 0.0, 1.0).unwrap()), 0.0);
    }

    #[test]
    fn posbias_raises_lower_bound_worked_example2() {
        let q = worked_example2();
        let plain = exact_iv_omega_intervals(&q)[1].free.bounds().unwrap();
        let pb = exact_iv_posbias_intervals(&q)[1].free.bounds().unwrap();
        assert!(pb.0 > plain.0, "{pb:?} vs {plain:?}");
        assert_eq!(pb.1, plain.1);
        // Oracle: the binding constraint is whichever floor is larger.
        let (q0, q1) = (&q[2], &q[3]);
        let d = q0.q11 - q1.q11;
        let propagated = (q0.q11 * q0.q0dot / (1.0 - q0.q0dot) + d) / q1.q0dot;
        let direct = q1.q11 / (1.0 - q1.q0dot);
        assert!((pb.0 - propagated.max(direct).max(0.0)).abs() < 1e-12);
    }

    #[test]
    fn posbias_reduces_to_exact_when_floors_do_not_bind() {
        let q0 = ObservedCellParams::new(0.5, 0.0, 0.5).unwrap();
        let q1 = ObservedCellParams::new(0.5, 0.0, 0.5).unwrap();
        let q = [q0, q1, q0, q1];
        assert_eq!(exact_iv_posbias_intervals(&q), exact_iv_omega_intervals(&q));
    }

    #[test]
    fn imperfect_iv_worked_lower_bound() {
        let q = worked_example1().map(|c| ObservedCellParams::new_unchecked(c.q10.to_f64(), c.q11.to_f64(), c.q0dot.to_f64()));
        let (w00, w01) = imperfect_iv_omega_bounds(&q[0], &q[1], 2.0 / 3.0, 1.5);
        let (lo00, _) = w00.bounds().unwrap();
        assert!((lo00 - 0.3209).abs() < 1e-4, "{lo00}");
        assert!((or_at(&q[0], lo00, &q[1], 0.0) - 1.5).abs() < 1e-3);
        assert!(w01.contains(0.0));
        // Exact arithmetic agrees.
        let qr = worked_example1();
        let (w00r, _) = imperfect_iv_omega_bounds(&qr[0], &qr[1], rat(2, 3), rat(3, 2));
        assert!((w00r.bounds().unwrap().0.to_f64() - lo00).abs() < 1e-12);
    }

    #[test]
    fn imperfect_iv_collapses_to_exact_iv() {
        let q = worked_example1();
        for x in 0..2 {
            let (w0, w1) = imperfect_iv_omega_bounds(&q[2 * x], &q[2 * x + 1], rat(1, 1), rat(1, 1));
            let s = exact_iv_omega_intervals(&q)[x];
            assert_eq!(w1, s.free);
            assert_eq!(w0, s.dirac);
        }
        let qf = worked_example2();
        let eps = 1e-9;
        let (w0, w1) = imperfect_iv_omega_bounds(&qf[0], &qf[1], 1.0 - eps, 1.0 + eps);
        let s = exact_iv_omega_intervals(&qf)[0];
        let (a, b) = (w1.bounds().unwrap(), s.free.bounds().unwrap());
        assert!((a.0 - b.0).abs() < 1e-7 && (a.1 - b.1).abs() < 1e-7);
        let (a, b) = (w0.bounds().unwrap(), s.dirac.bounds().unwrap());
        assert!((a.0 - b.0).abs() < 1e-7 && (a.1 - b.1).abs() < 1e-7);
    }

    #[test]
    fn imperfect_iv_lower_bounds_vanish_when_observed_or_inside() {
        let q0 = ObservedCellParams::new(0.4, 0.3, 0.3).unwrap();
        let q1 = ObservedCellParams::new(0.4, 0.3, 0.3).unwrap();
        let (w0, w1) = imperfect_iv_omega_bounds(&q0, &q1, 2.0 / 3.0, 1.5);
        assert_eq!(w0.bounds().unwrap().0, 0.0);
        assert_eq!(w1.bounds().unwrap().0, 0.0);
    }

    #[test]
    fn threshold_intervals_contain_exact_ones() {
        let q = worked_example1();
        for x in 0..2 {
            let (w0, w1) = imperfect_iv_omega_bounds(&q[2 * x], &q[2 * x + 1], rat(2, 3), rat(3, 2));
            let s = exact_iv_omega_intervals(&q)[x];
            assert!(w1.contains_interval(&s.free));
            assert!(w0.contains_interval(&s.dirac));
        }
    }

    #[test]
    fn interval_helpers() {
        let a: OmegaInterval<f64> = OmegaInterval::clipped(-0.5, 0.4);
        assert_eq!(a, OmegaInterval::Feasible { lo: 0.0, hi: 0.4 });
        assert_eq!(OmegaInterval::clipped(0.6, 0.4), OmegaInterval::Infeasible);
        assert_eq!(a.intersect(&OmegaInterval::clipped(0.5, 1.0)), OmegaInterval::Infeasible);
        assert!((a.width() - 0.4).abs() < 1e-15);
        assert_eq!(OmegaInterval::<f64>::Infeasible.width(), 0.0);
        let f32_case: OmegaInterval<f32> = OmegaInterval::clipped(0.25, 2.0);
        assert_eq!(f32_case.to_f64(), OmegaInterval::Feasible { lo: 0.25, hi: 1.0 });
    }

    fn simplex() -> impl Strategy<Value = ObservedCellParams<f64>> {
        (0.001f64..1.0, 0.001f64..1.0, 0.001f64..1.0).prop_map(|(a, b, c)| {
            let s = a + b + c;
            ObservedCellParams::new_unchecked(a / s, b / s, c / s)
        })
    }

    proptest! {
        #[test]
        fn exact_iv_interval_matches_grid(q0 in simplex(), q1 in simplex()) {
            let s = exact_iv_omega_intervals(&[q0, q1, q0, q1])[0];
            let g = 2000;
            let ok: Vec<f64> = (0..=g).map(|i| i as f64 / g as f64)
                .filter(|&w| dirac_map(&q0, &q1, w).is_some_and(|v| (0.0..=1.0).contains(&v)))
                .collect();
            match s.free.bounds() {
                None => prop_assert!(ok.is_empty()),
                Some((lo, hi)) => if let (Some(a), Some(b)) = (ok.first(), ok.last()) {
                    prop_assert!((a - lo).abs() <= 1.0 / g as f64 + 1e-12);
                    prop_assert!((b - hi).abs() <= 1.0 / g as f64 + 1e-12);
                },
            }
        }

        #[test]
        fn accepted_ors_within_threshold_region(q0 in simplex(), q1 in simplex(), u in 0.0f64..1.0) {
            let (w0, w1) = imperfect_iv_omega_bounds(&q0, &q1, 2.0 / 3.0, 1.5);
            if let (Some((a0, b0)), Some((a1, b1))) = (w0.bounds(), w1.bounds()) {
                // Some point of the region sits above every omega_{x,1} in range.
                let w = a1 + u * (b1 - a1);
                let lo = or_at(&q0, 1.0, &q1, w);
                let hi = or_at(&q0, 0.0, &q1, w);
                prop_assert!(lo <= 1.5 + 1e-9 && hi >= 2.0 / 3.0 - 1e-9);
                prop_assert!(a0 <= b0);
            }
        }
    }

    #[test]
    fn restricted_bounds_unrestricted_match_saturated() {
        let q = worked_example1();
        let b = restricted_psi_bounds(&q, rat(1, 2), PsiRestriction::None).unwrap();
        assert_eq!(b, (rat(-11, 100), rat(485, 1000)));
    }

    #[test]
    fn restricted_bounds_threshold_at_one_is_exact() {
        let q = worked_example1();
        let t = PsiRestriction::Threshold { t_l: rat(1, 1), t_h: rat(1, 1) };
        assert_eq!(
            restricted_psi_bounds(&q, rat(1, 2), t),
            restricted_psi_bounds(&q, rat(1, 2), PsiRestriction::ExactIv)
        );
    }

    #[test]
    fn restricted_bounds_nest() {
        let q = worked_example1();
        let half = rat(1, 2);
        let none = restricted_psi_bounds(&q, half, PsiRestriction::None).unwrap();
        let thr = restricted_psi_bounds(&q, half, PsiRestriction::Threshold { t_l: rat(2, 3), t_h: rat(3, 2) }).unwrap();
        let ex = restricted_psi_bounds(&q, half, PsiRestriction::ExactIv).unwrap();
        assert!(none.0 <= thr.0 && thr.0 <= ex.0 && ex.1 <= thr.1 && thr.1 <= none.1);
    }

    /// Dense grid over both omegas of a stratum.
    fn grid_arm_range(q0: &ObservedCellParams<f64>, q1: &ObservedCellParams<f64>, qz: f64, t_l: f64, t_h: f64) -> Option<(f64, f64)> {
        let g = 400;
        let mut out: Option<(f64, f64)> = None;
        for i in 0..=g {
            for j in 0..=g {
                let (p0, p1) = (q0.outcome_prob(i as f64 / g as f64), q1.outcome_prob(j as f64 / g as f64));
                let lhs = p1 * (1.0 - p0);
                let (rl, rh) = (t_l * p0 * (1.0 - p1), t_h * p0 * (1.0 - p1));
                if lhs >= rl && lhs <= rh {
                    let v = (1.0 - qz) * p0 + qz * p1;
                    out = Some(out.map_or((v, v), |(a, b)| (a.min(v), b.max(v))));
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn threshold_arm_range_matches_grid(q0 in simplex(), q1 in simplex(), qz in 0.05f64..0.95) {
            let q = [q0, q1, q0, q1];
            let exact = arm_outcome_range(&q, 0, qz, PsiRestriction::Threshold { t_l: 2.0 / 3.0, t_h: 1.5 });
            if let (Some((lo, hi)), Some((glo, ghi))) = (exact, grid_arm_range(&q0, &q1, qz, 2.0 / 3.0, 1.5)) {
                // The grid sits inside the region, and within one step of its edge.
                prop_assert!(lo <= glo + 1e-12 && ghi <= hi + 1e-12);
                prop_assert!(glo - lo < 0.01 && hi - ghi < 0.01, "{lo} {glo} {hi} {ghi}");
            }
            if exact.is_none() {
                prop_assert!(grid_arm_range(&q0, &q1, qz, 2.0 / 3.0, 1.5).is_none());
            }
        }
    }
}
