//! Atomic level data, unit conversions and closure cycles.

mod closure;
mod table;
pub mod units;

use thiserror::Error;

pub use closure::{closure_residual, enumerate_closures, ClosureCycle, CycleLeg, Sign};
pub use table::{
    load_level_table, transition_frequency, AngularMomentum, Level, LevelTable, Parity, Transition,
    TransitionKey, TransitionKind,
};
pub use units::{frequency_from_wavelength, vacuum_wavelength, wavenumber_to_frequency};

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("non-finite wavenumber {0}")]
    NonFinite(f64),
    #[error("frequency or wavelength must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("unknown level `{0}`")]
    UnknownLabel(String),
    #[error("no transition joins `{0}`")]
    UnknownTransition(TransitionKey),
    #[error("upper level `{upper}` does not lie above `{lower}`")]
    NonPositiveInterval { lower: String, upper: String },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("duplicate level label `{0}`")]
    DuplicateLabel(String),
    #[error("level label `{0}` may only contain ASCII letters, digits and `_`")]
    BadLabel(String),
    #[error("duplicate transition `{0}`")]
    DuplicateTransition(TransitionKey),
    #[error("transition endpoint `{0}` is not a level of the table")]
    DanglingEndpoint(String),
    #[error("line {line}: transition endpoint `{label}` is not a level of the table")]
    DanglingEndpointAt { line: u64, label: String },
    #[error("no level with zero energy")]
    NoGroundLevel,
    #[error("more than one level with zero energy")]
    MultipleGroundLevels,
    #[error("level `{label}`: {reason}")]
    InvalidLevel { label: String, reason: String },
    #[error("transition `{key}`: {reason}")]
    InvalidTransition { key: TransitionKey, reason: String },
    #[error("`{0}` is not a transition key of the form lower-upper")]
    BadKey(String),
    #[error("not a closure cycle: {0}")]
    NotACycle(String),
    #[error("no frequency supplied for `{0}`")]
    MissingFrequency(TransitionKey),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
