//! Conditional power, predictive probability of success and design-stage
//! probability of success for continuous, binary and time-to-event endpoints.

pub mod api;
pub mod betabinom;
pub mod endpoints;
pub mod error;
pub mod interim;
pub mod mcval;
pub mod numerics;

pub use endpoints::{
    AllocationRatio, Criterion, EndpointKind, EndpointSpec, NaturalPrior, ResultBundle,
};
pub use error::{Error, Result};
pub use interim::{GammaValue, InterimSummary, NormalPrior, SuccessCriterion};
pub use numerics::{Alternative, KahanSum, LogReal, Probability};
