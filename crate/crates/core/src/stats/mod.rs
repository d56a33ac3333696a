//! Frequency-metrology statistics: overlapping Allan deviation, the closure
//! estimator with uncertainty propagation, and white-noise projections.

mod allan;
mod closure;
mod projection;

use thiserror::Error;

use crate::spectra::TransitionKey;

pub use allan::{allan_deviation, allan_point, AllanPoint, AllanUnits};
pub use closure::{closure_estimate, ClosureEstimate, ClosureInput, Measurement};
pub use projection::{sensitivity_projection, series_measurement, settle_cycles};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("averaging time {tau} s is not an integer multiple of the cycle duration {cycle} s")]
    NotAMultiple { tau: f64, cycle: f64 },
    #[error("averaging time {tau} s exceeds a third of the series span ({max} s)")]
    TauTooLong { tau: f64, max: f64 },
    #[error("no measurement supplied for `{0}`")]
    MissingTransition(TransitionKey),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
