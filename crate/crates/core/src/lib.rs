//! Epidemic Video-on-Demand workload model with buzz regimes.
//!
//! - [`model`]: parameters, state space, transition rates, mean workload.
//! - [`simulator`]: exact event-driven simulation and event traces.
//! - [`series`] / [`path`]: session logs, sampled series, exact workload paths.
//! - [`estimation`]: calibration of the seven rates from one workload trace.
//! - [`spectrum`]: theoretical and empirical large-deviation spectra.
//! - [`provisioning`]: reconfiguration scale, safety margin, server packing.
//! - [`experiment`]: batch experiments emitting CSV data.

pub mod error;
pub mod estimation;
pub mod experiment;
pub mod model;
pub mod path;
pub mod presets;
pub mod provisioning;
pub mod series;
pub mod simulator;
pub mod spectrum;

pub use error::{Error, Result};
pub use estimation::{estimate_all, estimate_series, EstimationConfig, EstimationResult};
pub use experiment::{ClosureReport, ExperimentConfig, ReplicationEstimate};
pub use model::{
    is_stable, mean_beta, mean_workload, transition_rates, ModelParams, Regime, SystemState,
    TransitionRates,
};
pub use path::WorkloadPath;
pub use series::{SessionRecord, WorkloadSeries};
pub use simulator::{simulate, Event, EventKind, EventTrace, Horizon};
pub use spectrum::{
    empirical_spectrum, theoretical_spectrum, RateMatrix, SpectrumCurve, SpectrumPoint,
};
