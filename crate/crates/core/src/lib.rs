//! Machine learning with chaotic strange-attractor feature transforms.
//!
//! Scalar predictors become initial conditions of a chaotic flow, the flow
//! is integrated with fixed-step RK4, and the evolved states at a chosen
//! iteration feed a linear readout.

pub mod attractor;
pub mod circuit;
pub mod data;
pub mod error;
pub mod experiment;
pub mod hyperopt;
pub mod lyapunov;
pub mod readout;
pub mod rng;
pub mod serde_float;
pub mod stats;
pub mod transform;

pub use attractor::{AttractorKind, AttractorSpec, IntegrationConfig, State3};
pub use error::{Error, Result};
