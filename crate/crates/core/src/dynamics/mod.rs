//! Density-matrix evolution under a Lindblad generator with an optional
//! state-dependent perturbation.
//!
//! The master equation integrated here is
//!
//! ```text
//! dρ/dt = −i[H(t) + H_NL(ρ), ρ] + Σₖ γₖ (Lₖ ρ Lₖ† − ½{Lₖ†Lₖ, ρ}),   Lₖ = |lower⟩⟨upper|
//! ```
//!
//! with H in rad/s. `H_NL(ρ)` is diagonal, so it preserves the trace.

mod density;
mod generator;
mod integrator;

use thiserror::Error;

pub use density::DensityMatrix;
pub use generator::{
    build_generator, nonlinear_shift, Branch, DecayChannel, DecaySpec, DriveTerm, EvolutionGenerator,
    NonlinearModel,
};
pub use integrator::{evolve, evolve_from, step, STABILITY_LIMIT};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("level `{0}` is not part of the table or subset")]
    UnknownLevel(String),
    #[error("no transition record joins `{lower}` and `{upper}`")]
    NoTransition { lower: String, upper: String },
    #[error("level `{0}` has no lifetime but decay was requested")]
    MissingLifetime(String),
    #[error("invalid drive: {0}")]
    InvalidDrive(String),
    #[error("drives form a closed loop; no common rotating frame exists")]
    DriveLoop,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("step {dt:e} s too large for generator rate {rate:e} s⁻¹ (need dt·rate < 0.1)")]
    StepTooLarge { dt: f64, rate: f64 },
}
