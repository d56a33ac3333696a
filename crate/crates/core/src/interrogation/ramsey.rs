use std::f64::consts::{FRAC_PI_2, TAU};

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_from, DensityMatrix, DriveTerm, EvolutionGenerator};
use crate::rng::stream_rng;
use crate::spectra::TransitionKey;

use super::InterrogationError;

const PULSE_STEPS: f64 = 64.0;
const MIN_FREE_STEPS: f64 = 64.0;
/// Target dt·rate during free evolution.
const FREE_STEP_RATE: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum InitialState {
    /// All population in the lower level of the interrogated transition.
    #[default]
    Lower,
    /// All population in the named level.
    Level(String),
}

/// π/2 – T – π/2 interrogation of one transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RamseyProtocol {
    pub transition: TransitionKey,
    pub pulse_s: f64,
    pub dark_time_s: f64,
    pub rabi_rad_s: f64,
    pub initial: InitialState,
}

impl RamseyProtocol {
    /// Protocol with π/2 pulses of length `pulse_s`, i.e. Ω = π/(2·pulse_s).
    pub fn new(transition: TransitionKey, pulse_s: f64, dark_time_s: f64) -> Result<Self, InterrogationError> {
        let p = RamseyProtocol {
            transition,
            pulse_s,
            dark_time_s,
            rabi_rad_s: FRAC_PI_2 / pulse_s,
            initial: InitialState::Lower,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), InterrogationError> {
        let bad = |m: String| Err(InterrogationError::InvalidProtocol(m));
        if !(self.pulse_s > 0.0) || !self.pulse_s.is_finite() {
            return bad(format!("pulse duration {} s must be positive", self.pulse_s));
        }
        if !(self.dark_time_s > 0.0) || !self.dark_time_s.is_finite() {
            return bad(format!("dark time {} s must be positive", self.dark_time_s));
        }
        let area = self.rabi_rad_s * self.pulse_s;
        if (area - FRAC_PI_2).abs() > 1e-6 * FRAC_PI_2 {
            return bad(format!("pulse area {area} rad is not π/2"));
        }
        Ok(())
    }

    /// Duration of one π/2 – T – π/2 shot.
    pub fn shot_duration(&self) -> f64 {
        2.0 * self.pulse_s + self.dark_time_s
    }
}

/// Probability of finding the atom in the upper level after the Ramsey
/// sequence, with the laser detuned by `detuning_hz` from the table
/// frequency. Decay and nonlinear terms of `gen` are included; any drives
/// already on `gen` are replaced by the two Ramsey pulses.
pub fn ramsey_probability(
    protocol: &RamseyProtocol,
    gen: &EvolutionGenerator,
    detuning_hz: f64,
) -> Result<f64, InterrogationError> {
    protocol.validate()?;
    let (lower, upper) = gen
        .endpoints(&protocol.transition)
        .ok_or_else(|| InterrogationError::UnknownTransition(protocol.transition.clone()))?;
    let start = match &protocol.initial {
        InitialState::Lower => lower,
        InitialState::Level(label) => gen
            .index_of(label)
            .ok_or_else(|| InterrogationError::InvalidProtocol(format!("initial level `{label}` not in subset")))?,
    };
    let (tp, t_dark) = (protocol.pulse_s, protocol.dark_time_s);
    let pulse = |start_s: f64| DriveTerm {
        lower,
        upper,
        rabi_rad_s: protocol.rabi_rad_s,
        detuning_rad_s: TAU * detuning_hz,
        phase_rad: 0.0,
        start_s,
        end_s: start_s + tp,
    };
    let g = gen.with_drives(vec![pulse(0.0), pulse(tp + t_dark)])?;

    let rho = DensityMatrix::pure(g.dim(), start)?;
    let rho = evolve_from(&rho, &g, 0.0, tp, tp / PULSE_STEPS)?;
    let rate = g.rate_bound(rho.as_slice(), &[]);
    let free_steps = (t_dark * rate / FREE_STEP_RATE).ceil().max(MIN_FREE_STEPS);
    let rho = evolve_from(&rho, &g, tp, t_dark, t_dark / free_steps)?;
    let rho = evolve_from(&rho, &g, tp + t_dark, tp, tp / PULSE_STEPS)?;
    Ok(rho.population(upper).clamp(0.0, 1.0))
}

/// Number of atoms detected per shot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomCount {
    Finite(u32),
    /// Noiseless limit: the measured fraction equals the probability.
    Infinite,
}

impl AtomCount {
    /// Measured excitation fraction for probability `p`.
    pub fn sample<R: rand::Rng>(self, p: f64, rng: &mut R) -> f64 {
        match self {
            AtomCount::Infinite => p,
            AtomCount::Finite(n) => {
                let k = Binomial::new(n as u64, p.clamp(0.0, 1.0))
                    .expect("probability clamped to [0, 1]")
                    .sample(rng);
                k as f64 / n as f64
            }
        }
    }

    pub fn as_option(self) -> Option<u32> {
        match self {
            AtomCount::Finite(n) => Some(n),
            AtomCount::Infinite => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub detuning_hz: f64,
    pub probability: f64,
    /// `None` for a noiseless point.
    pub n_atoms: Option<u32>,
}

/// Measured excitation fraction against detuning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeCurve {
    /// Dark time of the protocol that produced the curve.
    pub dark_time_s: f64,
    pub points: Vec<FringePoint>,
}

impl FringeCurve {
    /// Samples a curve from known probabilities. Point `i` draws from
    /// stream `i` of `seed`.
    pub fn sample(
        dark_time_s: f64,
        detunings_hz: &[f64],
        probabilities: &[f64],
        atoms: AtomCount,
        seed: u64,
    ) -> Result<Self, InterrogationError> {
        check_grid(detunings_hz)?;
        if probabilities.len() != detunings_hz.len() {
            return Err(InterrogationError::InsufficientData("one probability per detuning required".into()));
        }
        if atoms == AtomCount::Finite(0) {
            return Err(InterrogationError::InvalidProtocol("at least one atom required".into()));
        }
        let points = detunings_hz
            .iter()
            .zip(probabilities)
            .enumerate()
            .map(|(i, (&d, &p))| {
                let mut rng = stream_rng(seed, i as u64);
                FringePoint {
                    detuning_hz: d,
                    probability: atoms.sample(p, &mut rng),
                    n_atoms: atoms.as_option(),
                }
            })
            .collect();
        Ok(FringeCurve { dark_time_s, points })
    }

    pub fn detunings(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.detuning_hz).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.probability).collect()
    }

    /// CSV with header `detuning_hz,probability,n_atoms` (blank count for
    /// noiseless points).
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["detuning_hz", "probability", "n_atoms"])?;
        for p in &self.points {
            w.write_record([
                p.detuning_hz.to_string(),
                p.probability.to_string(),
                p.n_atoms.map(|n| n.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_grid(detunings_hz: &[f64]) -> Result<(), InterrogationError> {
    if detunings_hz.is_empty() {
        return Err(InterrogationError::EmptyScan);
    }
    if detunings_hz.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(InterrogationError::NotIncreasing);
    }
    Ok(())
}

/// Noiseless Ramsey probabilities at each detuning, evaluated in parallel.
pub fn fringe_probabilities(
    protocol: &RamseyProtocol,
    gen: &EvolutionGenerator,
    detunings_hz: &[f64],
) -> Result<Vec<f64>, InterrogationError> {
    detunings_hz
        .par_iter()
        .map(|&d| ramsey_probability(protocol, gen, d))
        .collect()
}

/// Scans the Ramsey fringe and samples quantum projection noise at each
/// detuning. Deterministic for a fixed seed.
pub fn scan_fringe(
    protocol: &RamseyProtocol,
    gen: &EvolutionGenerator,
    detunings_hz: &[f64],
    atoms: AtomCount,
    seed: u64,
) -> Result<FringeCurve, InterrogationError> {
    check_grid(detunings_hz)?;
    let probabilities = fringe_probabilities(protocol, gen, detunings_hz)?;
    FringeCurve::sample(protocol.dark_time_s, detunings_hz, &probabilities, atoms, seed)
}

/// `n` evenly spaced points on `[center − half_width, center + half_width]`.
pub fn detuning_grid(center_hz: f64, half_width_hz: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![center_hz];
    }
    (0..n)
        .map(|i| center_hz - half_width_hz + 2.0 * half_width_hz * i as f64 / (n - 1) as f64)
        .collect()
}
