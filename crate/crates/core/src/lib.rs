//! Simulation and analysis of closure tests on connected atomic clock
//! transitions.
//!
//! Three transitions that share their levels pairwise obey
//! `f12 + f23 − f13 = 0` whenever every frequency is a difference of level
//! energies. This crate models level tables and their closure cycles
//! ([`spectra`]), evolves density matrices under a Lindblad generator with
//! an optional state-dependent perturbation ([`dynamics`]), simulates Ramsey
//! interrogation, fringe fitting and frequency servos ([`interrogation`]),
//! and turns the resulting frequency series into closure estimates with
//! uncertainties ([`stats`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod interrogation;
pub mod rng;
pub mod spectra;
pub mod stats;

pub use dynamics::{
    build_generator, evolve, nonlinear_shift, step, DecaySpec, DensityMatrix, DriveTerm,
    DynamicsError, EvolutionGenerator, NonlinearModel,
};
pub use interrogation::{
    fit_center, ramsey_probability, run_interleaved, run_servo, scan_fringe, AtomCount,
    FitResult, FrequencySeries, FringeCurve, InterrogationError, LineshapeModel, NoiseSettings,
    RamseyProtocol, ServoSettings,
};
pub use spectra::{
    closure_residual, enumerate_closures, load_level_table, transition_frequency,
    vacuum_wavelength, wavenumber_to_frequency, ClosureCycle, LevelTable, SpectraError,
    TransitionKey,
};
pub use stats::{
    allan_deviation, closure_estimate, sensitivity_projection, AllanPoint, ClosureEstimate,
    Measurement, StatsError,
};
