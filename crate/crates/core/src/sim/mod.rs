//! Simulation studies: data generators, the replicate harness and the
//! prior acceptance sweep.

pub mod dgp;
pub mod study;
pub mod sweep;

pub use dgp::{gen_heckman_data, gen_saturated_data, generate, BiasDirection, DgpKind, DgpSpec, SimDataset};
pub use study::{run_study, summary_csv, ModelOutcome, ModelSpec, ModelSummary, ReplicationResult, StudyConfig, StudyResult};
pub use sweep::{prior_ar_sweep, sweep_csv, SweepPoint};
