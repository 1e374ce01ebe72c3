//! The saturated model: conjugate Dirichlet posterior for the observed
//! simplex of every cell, uniform `omega`, the risk-difference estimand and
//! its nonparametric bounds, and the missing-at-random baseline.

use num_traits::Float;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{
    CellIndex, CellParams, CountsTable, DirichletHyper, JointDraw, MissingCellParam,
    ObservedCellParams, PosteriorDraws, StratumTally, ZMarginParam,
};
use crate::rng::{domain, Streams};
use crate::scalar::Scalar;

/// Adds observed counts to the prior pseudo-counts of every cell.
pub fn conjugate_update(prior: &DirichletHyper, counts: &CountsTable) -> [DirichletHyper; 4] {
    counts.cells.map(|n| DirichletHyper {
        a1: prior.a1 + n.n10 as f64,
        a2: prior.a2 + n.n11 as f64,
        a3: prior.a3 + n.n0dot as f64,
    })
}

/// How `q_z = P(Z=1)` enters the estimand.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum QzMode {
    /// `Beta(1 + #{Z=1}, 1 + #{Z=0})`.
    #[default]
    Posterior,
    Fixed(f64),
}

/// Sampler for `q_z`, resolved against a counts table.
#[derive(Debug, Clone, Copy)]
pub(crate) enum QzSampler {
    Beta(Beta<f64>),
    Fixed(f64),
}

impl QzSampler {
    pub(crate) fn new(mode: QzMode, counts: &CountsTable) -> Result<Self> {
        match mode {
            QzMode::Fixed(v) => {
                ZMarginParam::new(v)?;
                Ok(Self::Fixed(v))
            }
            QzMode::Posterior => {
                let (z0, z1) = counts.zcounts();
                Beta::new(1.0 + z1 as f64, 1.0 + z0 as f64)
                    .map(Self::Beta)
                    .map_err(|e| invalid(format!("qz posterior: {e}")))
            }
        }
    }

    pub(crate) fn draw<R: Rng>(&self, rng: &mut R) -> ZMarginParam<f64> {
        match self {
            Self::Beta(b) => ZMarginParam(b.sample(rng)),
            Self::Fixed(v) => ZMarginParam(*v),
        }
    }
}

/// Dirichlet draws by normalising independent Gamma variates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DirichletSampler {
    gammas: [Gamma<f64>; 3],
}

impl DirichletSampler {
    pub(crate) fn new(hyper: &DirichletHyper) -> Result<Self> {
        let g = |a: f64| Gamma::new(a, 1.0).map_err(|e| invalid(format!("Dirichlet shape {a}: {e}")));
        Ok(Self { gammas: [g(hyper.a1)?, g(hyper.a2)?, g(hyper.a3)?] })
    }

    #[inline]
    pub(crate) fn draw<R: Rng>(&self, rng: &mut R) -> ObservedCellParams<f64> {
        loop {
            let g = [
                self.gammas[0].sample(rng),
                self.gammas[1].sample(rng),
                self.gammas[2].sample(rng),
            ];
            let s = g[0] + g[1] + g[2];
            if s > 0.0 && s.is_finite() {
                let q10 = g[0] / s;
                let q11 = g[1] / s;
                return ObservedCellParams::new_unchecked(q10, q11, (1.0 - q10 - q11).max(0.0));
            }
        }
    }
}

/// Per-cell Dirichlet posteriors plus the treatment of `q_z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturatedPosterior {
    pub hyper: [DirichletHyper; 4],
    pub counts: CountsTable,
    pub qz: QzMode,
}

impl SaturatedPosterior {
    pub fn new(prior: &DirichletHyper, counts: &CountsTable, qz: QzMode) -> Self {
        Self { hyper: conjugate_update(prior, counts), counts: *counts, qz }
    }
}

/// Independent Monte Carlo draws from the saturated posterior.
pub fn sample_saturated_posterior(
    posterior: &SaturatedPosterior,
    ndraws: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    if ndraws == 0 {
        return Err(invalid("ndraws must be at least 1"));
    }
    let samplers = [
        DirichletSampler::new(&posterior.hyper[0])?,
        DirichletSampler::new(&posterior.hyper[1])?,
        DirichletSampler::new(&posterior.hyper[2])?,
        DirichletSampler::new(&posterior.hyper[3])?,
    ];
    let qz = QzSampler::new(posterior.qz, &posterior.counts)?;
    let streams = Streams::new(seed);
    let draws: Vec<JointDraw<f64>> = (0..ndraws as u64)
        .into_par_iter()
        .map(|k| {
            let cells = std::array::from_fn(|i| {
                let mut rng = streams.rng(&[domain::SATURATED, k, i as u64]);
                let q = samplers[i].draw(&mut rng);
                let w: f64 = rng.random();
                CellParams::new(CellIndex::ALL[i], q, MissingCellParam(w))
            });
            let mut rng = streams.rng(&[domain::QZ, k]);
            JointDraw { cells, qz: qz.draw(&mut rng) }
        })
        .collect();
    let n = ndraws as u64;
    Ok(PosteriorDraws::from_parts(
        draws,
        StratumTally { accepted: [n, n], attempted: [n, n] },
        seed,
    ))
}

/// Risk difference `P(Y=1|X=1) - P(Y=1|X=0)` for arbitrary `omega`.
pub fn psi_with<T: Scalar>(q: &[ObservedCellParams<T>; 4], omega: [T; 4], qz: ZMarginParam<T>) -> T {
    let one = T::one();
    let w = qz.0;
    let p: [T; 4] = std::array::from_fn(|i| q[i].outcome_prob(omega[i]));
    (p[3] * w + p[2] * (one - w)) - (p[1] * w + p[0] * (one - w))
}

/// Risk difference of a full parameter draw.
pub fn psi<T: Scalar>(cells: &[CellParams<T>; 4], qz: ZMarginParam<T>) -> T {
    psi_with(&cells.map(|c| c.q), cells.map(|c| c.omega.0), qz)
}

pub(crate) fn psi_of(draw: &JointDraw<f64>) -> f64 {
    psi(&draw.cells, draw.qz)
}

/// Identification region of the risk difference with no restriction on
/// `omega`: the treated arm at its extremes against the control arm at the
/// opposite ones.
pub fn psi_bounds<T: Scalar>(q: &[ObservedCellParams<T>; 4], qz: ZMarginParam<T>) -> (T, T) {
    let (zero, one) = (T::zero(), T::one());
    let upper = psi_with(q, [zero, zero, one, one], qz);
    let lower = psi_with(q, [one, one, zero, zero], qz);
    (lower, upper)
}

/// Odds of a probability; `None` at 0 or 1.
pub fn odds<T: Float>(p: T) -> Option<T> {
    if p > T::zero() && p < T::one() {
        Some(p / (T::one() - p))
    } else {
        None
    }
}

/// `OR(Y, Z | X = x)` from the two cells of a stratum, `None` when either
/// conditional probability sits on the boundary.
pub fn stratum_odds_ratio<T: Float + Scalar>(
    q_z0: &ObservedCellParams<T>,
    omega_z0: T,
    q_z1: &ObservedCellParams<T>,
    omega_z1: T,
) -> Option<T> {
    Some(odds(q_z1.outcome_prob(omega_z1))? / odds(q_z0.outcome_prob(omega_z0))?)
}

/// `[OR(Y,Z|X=0), OR(Y,Z|X=1)]` of a draw.
pub fn odds_ratios<T: Float + Scalar>(cells: &[CellParams<T>; 4]) -> [Option<T>; 2] {
    [0usize, 2].map(|b| {
        stratum_odds_ratio(&cells[b].q, cells[b].omega.0, &cells[b + 1].q, cells[b + 1].omega.0)
    })
}

/// Missing-at-random baseline: each cell's success rate gets a
/// `Beta(1 + n11, 1 + n10)` posterior from its observed rows and the missing
/// rows are imputed at that rate. Draws are returned with `q0dot = 0` and
/// `omega` equal to the sampled rate, so [`psi`] applies unchanged.
pub fn mar_estimate(counts: &CountsTable, ndraws: usize, qz: QzMode, seed: u64) -> Result<PosteriorDraws> {
    if ndraws == 0 {
        return Err(invalid("ndraws must be at least 1"));
    }
    let betas: Vec<Beta<f64>> = counts
        .cells
        .iter()
        .map(|n| Beta::new(1.0 + n.n11 as f64, 1.0 + n.n10 as f64).map_err(|e| invalid(e.to_string())))
        .collect::<Result<_>>()?;
    let qz = QzSampler::new(qz, counts)?;
    let streams = Streams::new(seed);
    let draws: Vec<JointDraw<f64>> = (0..ndraws as u64)
        .into_par_iter()
        .map(|k| {
            let cells = std::array::from_fn(|i| {
                let mut rng = streams.rng(&[domain::MAR, k, i as u64]);
                let rate = betas[i].sample(&mut rng);
                CellParams::new(
                    CellIndex::ALL[i],
                    ObservedCellParams::new_unchecked(1.0 - rate, rate, 0.0),
                    MissingCellParam(rate),
                )
            });
            let mut rng = streams.rng(&[domain::QZ, k]);
            JointDraw { cells, qz: qz.draw(&mut rng) }
        })
        .collect();
    let n = ndraws as u64;
    Ok(PosteriorDraws::from_parts(
        draws,
        StratumTally { accepted: [n, n], attempted: [n, n] },
        seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CellCounts;
    use crate::scalar::rat;
    use num_rational::Rational64;
    use proptest::prelude::*;

    fn worked_example1() -> [ObservedCellParams<Rational64>; 4] {
        [
            ObservedCellParams::new_unchecked(rat(47, 100), rat(6, 100), rat(48, 100)),
            ObservedCellParams::new_unchecked(rat(54, 100), rat(29, 100), rat(16, 100)),
            ObservedCellParams::new_unchecked(rat(29, 100), rat(28, 100), rat(43, 100)),
            ObservedCellParams::new_unchecked(rat(38, 100), rat(49, 100), rat(12, 100)),
        ]
    }

    #[test]
    fn conjugate_update_adds_counts() {
        let counts = CountsTable::new([CellCounts { n10: 10, n11: 20, n0dot: 30 }; 4]);
        let post = conjugate_update(&DirichletHyper::default(), &counts);
        assert_eq!(post[0], DirichletHyper { a1: 11.0, a2: 21.0, a3: 32.0 });
        assert_eq!(post[2].mean()[1], 21.0 / 64.0);
        assert_eq!(post[1].mean()[1], 0.328125);
        let zero = conjugate_update(&DirichletHyper::default(), &CountsTable::zeros());
        assert_eq!(zero, [DirichletHyper::default(); 4]);
    }

    #[test]
    fn psi_without_missingness_ignores_omega() {
        let q = [
            ObservedCellParams::new(0.6, 0.4, 0.0).unwrap(),
            ObservedCellParams::new(0.6, 0.4, 0.0).unwrap(),
            ObservedCellParams::new(0.4, 0.6, 0.0).unwrap(),
            ObservedCellParams::new(0.4, 0.6, 0.0).unwrap(),
        ];
        for qz in [0.1, 0.5, 0.9] {
            let v = psi_with(&q, [0.3, 0.9, 0.1, 0.7], ZMarginParam(qz));
            assert!((v - 0.2).abs() < 1e-15);
        }
        let (lo, hi) = psi_bounds(&q, ZMarginParam(0.5));
        assert_eq!(lo, hi);
    }

    #[test]
    fn psi_worked_truth_is_exact() {
        let q = worked_example1();
        let omega = [rat(37, 48), rat(13, 16), rat(29, 43), rat(8, 12)];
        let v = psi_with(&q, omega, ZMarginParam(rat(1, 2)));
        assert_eq!(v, rat(57, 100) - rat(425, 1000));
        assert_eq!(v, rat(145, 1000));
    }

    #[test]
    fn psi_bounds_worked_example1() {
        let (lo, hi) = psi_bounds(&worked_example1(), ZMarginParam(rat(1, 2)));
        // Per-cell intervals [q11, q11 + q0dot], then qz-weighted differences.
        let treated_lo = (rat(49, 100) + rat(28, 100)) / rat(2, 1);
        let treated_hi = (rat(61, 100) + rat(71, 100)) / rat(2, 1);
        let control_lo = (rat(29, 100) + rat(6, 100)) / rat(2, 1);
        let control_hi = (rat(45, 100) + rat(54, 100)) / rat(2, 1);
        assert_eq!(lo, treated_lo - control_hi);
        assert_eq!(hi, treated_hi - control_lo);
        assert_eq!((lo, hi), (rat(-11, 100), rat(485, 1000)));
    }

    #[test]
    fn psi_bounds_fully_missing_are_trivial() {
        let q = [ObservedCellParams::new(0.0, 0.0, 1.0).unwrap(); 4];
        assert_eq!(psi_bounds(&q, ZMarginParam(0.3)), (-1.0, 1.0));
    }

    #[test]
    fn equal_rates_give_zero_psi() {
        let q = [ObservedCellParams::new(rat(1, 5), rat(3, 10), rat(1, 2)).unwrap(); 4];
        let w = [rat(2, 5); 4];
        assert_eq!(psi_with(&q, w, ZMarginParam(rat(1, 3))), rat(0, 1));
    }

    #[test]
    fn saturated_prior_moments() {
        let post = SaturatedPosterior::new(&DirichletHyper::default(), &CountsTable::zeros(), QzMode::Posterior);
        let draws = sample_saturated_posterior(&post, 1_000_000, 11).unwrap();
        assert_eq!(draws.accepted, 1_000_000);
        assert_eq!(draws.attempted, 1_000_000);
        let n = draws.len() as f64;
        let mean_missing = draws.draws.iter().map(|d| d.cells[0].q.q0dot).sum::<f64>() / n;
        assert!((mean_missing - 0.5).abs() < 0.002, "{mean_missing}");
        let mut w: Vec<f64> = draws.draws.iter().map(|d| d.cells[2].omega.0).collect();
        w.sort_by(f64::total_cmp);
        let ks = w
            .iter()
            .enumerate()
            .map(|(i, &v)| ((i + 1) as f64 / n - v).abs().max((v - i as f64 / n).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.005, "ks {ks}");
    }

    #[test]
    fn saturated_posterior_concentrates_on_worked() {
        let counts = CountsTable::new([CellCounts { n10: 470_000, n11: 60_000, n0dot: 480_000 }; 4]);
        let post = SaturatedPosterior::new(&DirichletHyper::default(), &counts, QzMode::Fixed(0.5));
        let draws = sample_saturated_posterior(&post, 20_000, 5).unwrap();
        let n = draws.len() as f64;
        let m: [f64; 3] = [0, 1, 2].map(|j| {
            draws
                .draws
                .iter()
                .map(|d| [d.cells[0].q.q10, d.cells[0].q.q11, d.cells[0].q.q0dot][j])
                .sum::<f64>()
                / n
        });
        let truth = [0.47 / 1.01, 0.06 / 1.01, 0.48 / 1.01];
        for j in 0..3 {
            assert!((m[j] - truth[j]).abs() < 0.002);
        }
        assert!((m[0] - 0.47).abs() < 0.01 && (m[2] - 0.48).abs() < 0.01);
    }

    #[test]
    fn saturated_draws_are_seed_deterministic() {
        let post = SaturatedPosterior::new(&DirichletHyper::default(), &CountsTable::zeros(), QzMode::Posterior);
        let a = sample_saturated_posterior(&post, 100, 3).unwrap();
        let b = sample_saturated_posterior(&post, 100, 3).unwrap();
        assert_eq!(a, b);
        assert!(sample_saturated_posterior(&post, 0, 3).is_err());
    }

    #[test]
    fn mar_symmetric_and_extreme() {
        let sym = CountsTable::new([CellCounts { n10: 40, n11: 40, n0dot: 20 }; 4]);
        let d = mar_estimate(&sym, 50_000, QzMode::Posterior, 1).unwrap();
        let mean = d.psi().iter().sum::<f64>() / d.len() as f64;
        assert!(mean.abs() < 0.005, "{mean}");

        let control = CellCounts { n10: 50, n11: 0, n0dot: 50 };
        let treated = CellCounts { n10: 0, n11: 50, n0dot: 50 };
        let ext = CountsTable::new([control, control, treated, treated]);
        let d = mar_estimate(&ext, 50_000, QzMode::Posterior, 2).unwrap();
        let mean = d.psi().iter().sum::<f64>() / d.len() as f64;
        assert!((mean - (51.0 / 52.0 - 1.0 / 52.0)).abs() < 0.003, "{mean}");
    }

    #[test]
    fn mar_worked_example2_plug_in() {
        // Observed conditionals P(Y=1 | R=1, x, z) from example 2.
        let obs = [(0.49, 0.14), (0.50, 0.23), (0.31, 0.22), (0.27, 0.24)];
        let rate: Vec<f64> = obs.iter().map(|(a, b)| b / (a + b)).collect();
        let oracle = 0.5 * (rate[2] + rate[3]) - 0.5 * (rate[0] + rate[1]);
        assert!((oracle - 0.1742).abs() < 1e-4, "{oracle}");

        let per_cell = 100_000.0 / 4.0;
        let cells = [
            (0.49, 0.14, 0.36),
            (0.50, 0.23, 0.28),
            (0.31, 0.22, 0.46),
            (0.27, 0.24, 0.49),
        ]
        .map(|(a, b, c)| CellCounts {
            n10: (a * per_cell) as u64,
            n11: (b * per_cell) as u64,
            n0dot: (c * per_cell) as u64,
        });
        let d = mar_estimate(&CountsTable::new(cells), 20_000, QzMode::Fixed(0.5), 3).unwrap();
        let mean = d.psi().iter().sum::<f64>() / d.len() as f64;
        assert!((mean - oracle).abs() < 0.005, "{mean} vs {oracle}");
    }

    #[test]
    fn odds_ratio_boundaries() {
        let q = ObservedCellParams::new(0.0, 1.0, 0.0).unwrap();
        let r = ObservedCellParams::new(0.5, 0.5, 0.0).unwrap();
        assert!(stratum_odds_ratio(&q, 0.0, &r, 0.0).is_none());
        assert_eq!(stratum_odds_ratio(&r, 0.0, &r, 0.0), Some(1.0));
    }

    proptest! {
        #[test]
        fn bounds_contain_every_omega(
            raw in proptest::array::uniform4((0.01f64..1.0, 0.01f64..1.0, 0.0f64..1.0)),
            w in proptest::array::uniform4(0.0f64..=1.0),
            qz in 0.0f64..=1.0,
        ) {
            let q = raw.map(|(a, b, c)| {
                let s = a + b + c;
                ObservedCellParams::new_unchecked(a / s, b / s, c / s)
            });
            let (lo, hi) = psi_bounds(&q, ZMarginParam(qz));
            let v = psi_with(&q, w, ZMarginParam(qz));
            prop_assert!(lo <= hi);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            prop_assert!((-1.0..=1.0).contains(&v));
        }
    }
}
