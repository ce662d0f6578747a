//! Classical shadow estimators for rank-one orthonormal measurements.
//!
//! Three estimators are provided: least squares (`LS`), regularized least
//! squares (`RLS`) and the channel-inversion shadow (`CS`). Measurement
//! settings are drawn from global Haar, local Haar tensor, mixed or fixed
//! ensembles and outcomes are sampled multinomially.

// `!(x > 0.0)` guards reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensembles;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod measurement;
pub mod quantum;
pub mod rng;
pub mod stats;
pub mod theory;
pub mod validate;

pub use ensembles::{sample_unitary, EnsembleSpec};
pub use error::{Error, Result};
pub use estimators::{build_frame_operator, estimate, FrameOperator, ShadowMethod, ShadowSet};
pub use experiments::{run_scenario, ResultRow, Scenario, ScenarioConfig, ScenarioKind};
pub use measurement::{run_plan, MeasurementPlan, MeasurementRecord};
pub use quantum::{
    born_probabilities, expectation, frobenius_error, project_physical, DensityMatrix, MethodTag,
    Observable, Operator, RankOnePovm, ShadowEstimate,
};
pub use rng::RngStream;
