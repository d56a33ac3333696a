//! Ramsey interrogation: fringe scans with projection noise, centre fits and
//! a two-point frequency servo.

mod fit;
mod ramsey;
mod series;
mod servo;

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::spectra::{SpectraError, TransitionKey};

pub use fit::{fit_center, FitResult, LineshapeModel};
pub use ramsey::{
    detuning_grid, fringe_probabilities, ramsey_probability, scan_fringe, AtomCount, FringeCurve, FringePoint,
    InitialState, RamseyProtocol,
};
pub use series::{FrequencySeries, SeriesSample};
pub use servo::{run_interleaved, run_servo, NoiseSettings, ServoChannel, ServoSettings};

#[derive(Debug, Error)]
pub enum InterrogationError {
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("transition `{0}` is not a link of the level subset")]
    UnknownTransition(TransitionKey),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("detuning scan is empty")]
    EmptyScan,
    #[error("detunings must be strictly increasing")]
    NotIncreasing,
    #[error("fit did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("fit design matrix is singular")]
    DegenerateDesign,
    #[error("invalid servo settings: {0}")]
    InvalidServo(String),
    #[error("servo on `{transition}` lost lock at cycle {cycle}")]
    LossOfLock { transition: TransitionKey, cycle: u64 },
    #[error("no usable discriminator on `{transition}` (slope {slope})")]
    NoDiscriminator { transition: TransitionKey, slope: f64 },
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}
