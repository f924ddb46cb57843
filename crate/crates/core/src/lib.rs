//! Direction finding for a sub-connected hybrid analog-digital ULA.
//!
//! Stage 1 runs Root-MUSIC over the `K` digital channels and unfolds the
//! phase into the `M` ambiguous directions. Stage 2 picks the true one, either
//! with a single grouped slot ([`estimate_fast`]) or with one full-array scan
//! per candidate ([`estimate_baseline`]).

pub mod array;
pub mod disambiguation;
pub mod error;
pub mod receiver;
pub mod root_music;
pub mod sim;

pub use array::{Angle, ArrayConfig, SpatialPhase};
pub use disambiguation::{
    delay_ratio, estimate, estimate_baseline, estimate_fast, CandidatePower, EstimateResult, EstimatorOptions, Method,
    PowerProfile,
};
pub use error::{DoaError, Result};
pub use receiver::{OffsetRule, SlotData, SlotKind, SourceScenario};
pub use root_music::{CandidateSet, RootSelector};
pub use sim::{
    complexity_flops, run_rmse_sweep, seeded_rng, trial_seed, ComplexityReport, ExperimentConfig, RmseRow, RmseTable,
};
