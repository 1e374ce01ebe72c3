//! Bayesian partial identification of a risk difference when a binary
//! outcome is missing not at random.
//!
//! The saturated model puts independent Dirichlet priors on the observed
//! cell probabilities and uniform priors on the unidentified share of
//! successes among missing rows. Instrument and missing-data-bias
//! assumptions are imposed by rejection, the acceptance rates double as
//! Bayes factors, and a Heckman selection model serves as a parametric
//! comparison.
//!
//! Closed-form pieces are generic over [`scalar::Scalar`]; the aliases at the
//! crate root fix them to `f64` or to exact rationals.

pub mod assumption;
pub mod error;
pub mod evidence;
pub mod heckman;
pub mod interval;
pub mod io;
pub mod model;
pub mod normal;
pub mod omega;
pub mod rng;
pub mod samplers;
pub mod saturated;
pub mod scalar;
pub mod sim;

pub use assumption::{AssumptionKind, AssumptionSpec};
pub use error::{Error, Result};
pub use heckman::{heckman_fit, GibbsConfig, HeckmanFit, HeckmanParams};
pub use evidence::{bayes_factor, bayes_factor_with_prior, prior_acceptance_rate, AcceptanceReport, EvidenceConfig, RateEstimate};
pub use interval::{credible_interval, IntervalSummary};
pub use model::{CellCounts, CellIndex, CountsTable, DirichletHyper, PosteriorDraws, StratumTally};
pub use samplers::{sample_restricted, AttemptBudget};
pub use saturated::QzMode;

use num_rational::Rational64;

pub type ObservedCellParams = model::ObservedCellParams<f64>;
pub type MissingCellParam = model::MissingCellParam<f64>;
pub type CellParams = model::CellParams<f64>;
pub type ZMarginParam = model::ZMarginParam<f64>;
pub type JointDraw = model::JointDraw<f64>;
pub type OmegaInterval = omega::OmegaInterval<f64>;

/// Exact counterparts for hand-checkable arithmetic.
pub type Rational = Rational64;
pub type ExactObservedCellParams = model::ObservedCellParams<Rational64>;
pub type ExactCellParams = model::CellParams<Rational64>;
pub type ExactOmegaInterval = omega::OmegaInterval<Rational64>;
