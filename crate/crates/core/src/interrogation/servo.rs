//! Two-point frequency lock on a Ramsey fringe.
//!
//! Each cycle probes the fringe at `f ± Δp` (default Δp = 1/(4T), the
//! half-contrast points), forms the population difference and corrects the
//! local-oscillator estimate by `gain` times the linearized frequency error.
//! The emitted estimate for a cycle is the value the oscillator was set to
//! during that cycle.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::EvolutionGenerator;
use crate::rng::stream_rng;
use crate::spectra::units::wavenumber_to_frequency;

use super::ramsey::{ramsey_probability, AtomCount, RamseyProtocol};
use super::series::{FrequencySeries, SeriesSample};
use super::InterrogationError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServoSettings {
    pub gain: f64,
    /// Total cycles; an interleaved run shares them round-robin.
    pub n_cycles: usize,
    /// Probe offset Δp in Hz; `None` means 1/(4T).
    pub probe_offset_hz: Option<f64>,
    /// Starting oscillator offset from the table frequency, Hz.
    pub initial_hz: f64,
    /// Idle time after each cycle.
    pub dead_time_s: f64,
    /// Extra idle time when an interleaved run switches transition.
    pub switch_time_s: f64,
}

impl Default for ServoSettings {
    fn default() -> Self {
        ServoSettings {
            gain: 0.5,
            n_cycles: 100,
            probe_offset_hz: None,
            initial_hz: 0.0,
            dead_time_s: 0.0,
            switch_time_s: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSettings {
    pub atoms: AtomCount,
    /// White frequency noise of the oscillator per cycle, Hz (1σ).
    pub lo_white_hz: f64,
}

impl NoiseSettings {
    pub fn noiseless() -> Self {
        NoiseSettings { atoms: AtomCount::Infinite, lo_white_hz: 0.0 }
    }
}

/// One transition of an interleaved run.
#[derive(Clone, Debug)]
pub struct ServoChannel<'a> {
    pub protocol: &'a RamseyProtocol,
    pub generator: &'a EvolutionGenerator,
    pub noise: NoiseSettings,
    pub initial_hz: f64,
}

fn validate(servo: &ServoSettings) -> Result<(), InterrogationError> {
    let bad = |m: String| Err(InterrogationError::InvalidServo(m));
    if !(servo.gain > 0.0 && servo.gain <= 1.0) {
        return bad(format!("gain {} outside (0, 1]", servo.gain));
    }
    if servo.n_cycles == 0 {
        return bad("at least one cycle required".into());
    }
    if let Some(p) = servo.probe_offset_hz {
        if !(p > 0.0) || !p.is_finite() {
            return bad(format!("probe offset {p} Hz must be positive"));
        }
    }
    if !(servo.dead_time_s >= 0.0) || !(servo.switch_time_s >= 0.0) {
        return bad("dead times must be ≥ 0".into());
    }
    if !servo.initial_hz.is_finite() {
        return bad("initial estimate must be finite".into());
    }
    Ok(())
}

fn validate_noise(noise: &NoiseSettings) -> Result<(), InterrogationError> {
    let bad = |m: String| Err(InterrogationError::InvalidServo(m));
    if !(noise.lo_white_hz >= 0.0) || !noise.lo_white_hz.is_finite() {
        return bad(format!("oscillator noise {} Hz must be ≥ 0", noise.lo_white_hz));
    }
    if noise.atoms == AtomCount::Finite(0) {
        return bad("at least one atom required".into());
    }
    Ok(())
}

fn reference_frequency(protocol: &RamseyProtocol, gen: &EvolutionGenerator) -> Result<f64, InterrogationError> {
    let (lower, upper) = gen
        .endpoints(&protocol.transition)
        .ok_or_else(|| InterrogationError::UnknownTransition(protocol.transition.clone()))?;
    Ok(wavenumber_to_frequency(gen.energy_cm1(upper) - gen.energy_cm1(lower))?)
}

fn cycle_duration(protocol: &RamseyProtocol, servo: &ServoSettings) -> f64 {
    2.0 * protocol.shot_duration() + servo.dead_time_s
}

/// Locks one transition over the given (cycle index, timestamp) slots.
fn lock<R: Rng>(
    channel: &ServoChannel<'_>,
    servo: &ServoSettings,
    slots: &[(u64, f64)],
    rng: &mut R,
) -> Result<Vec<SeriesSample>, InterrogationError> {
    let (protocol, gen, noise) = (channel.protocol, channel.generator, &channel.noise);
    let dark = protocol.dark_time_s;
    let probe = servo.probe_offset_hz.unwrap_or(0.25 / dark);
    let error_signal = |f: f64| -> Result<f64, InterrogationError> {
        Ok(ramsey_probability(protocol, gen, f + probe)? - ramsey_probability(protocol, gen, f - probe)?)
    };

    // Discriminator slope from the noiseless lineshape around the start point.
    let f0 = channel.initial_hz;
    let h = 1e-3 / dark;
    let slope = (error_signal(f0 + h)? - error_signal(f0 - h)?) / (2.0 * h);
    if !(slope < 0.0) {
        return Err(InterrogationError::NoDiscriminator { transition: protocol.transition.clone(), slope });
    }

    let lo_noise = Normal::new(0.0, noise.lo_white_hz).expect("validated σ ≥ 0");
    let mut estimate = f0;
    let mut samples = Vec::with_capacity(slots.len());
    for &(cycle, timestamp_s) in slots {
        let actual = if noise.lo_white_hz > 0.0 { estimate + lo_noise.sample(rng) } else { estimate };
        let upper = noise.atoms.sample(ramsey_probability(protocol, gen, actual + probe)?, rng);
        let lower = noise.atoms.sample(ramsey_probability(protocol, gen, actual - probe)?, rng);
        samples.push(SeriesSample { cycle, timestamp_s, frequency_hz: estimate });
        estimate -= servo.gain * (upper - lower) / slope;
        if (estimate - f0).abs() >= 0.5 / dark {
            return Err(InterrogationError::LossOfLock { transition: protocol.transition.clone(), cycle });
        }
    }
    Ok(samples)
}

/// Runs the servo on a single transition.
pub fn run_servo(
    protocol: &RamseyProtocol,
    gen: &EvolutionGenerator,
    servo: &ServoSettings,
    noise: &NoiseSettings,
    seed: u64,
) -> Result<FrequencySeries, InterrogationError> {
    validate(servo)?;
    validate_noise(noise)?;
    protocol.validate()?;
    let duration = cycle_duration(protocol, servo);
    let slots: Vec<(u64, f64)> = (0..servo.n_cycles as u64).map(|c| (c, c as f64 * duration)).collect();
    let channel = ServoChannel { protocol, generator: gen, noise: *noise, initial_hz: servo.initial_hz };
    let samples = lock(&channel, servo, &slots, &mut stream_rng(seed, 0))?;
    Ok(FrequencySeries {
        transition: protocol.transition.clone(),
        reference_hz: reference_frequency(protocol, gen)?,
        cycle_duration_s: duration,
        samples,
    })
}

/// Runs one servo per channel with cycles interleaved round-robin:
/// global cycle `c` belongs to channel `c mod n`. Channel `i` draws from
/// stream `i` of `seed`, so channels are simulated independently (and in
/// parallel) with results identical to a sequential run. The
/// `initial_hz` of `servo` is ignored in favour of each channel's own.
pub fn run_interleaved(
    channels: &[ServoChannel<'_>],
    servo: &ServoSettings,
    seed: u64,
) -> Result<Vec<FrequencySeries>, InterrogationError> {
    validate(servo)?;
    if channels.is_empty() {
        return Err(InterrogationError::InvalidServo("no transitions to interleave".into()));
    }
    for c in channels {
        c.protocol.validate()?;
        validate_noise(&c.noise)?;
        if !c.initial_hz.is_finite() {
            return Err(InterrogationError::InvalidServo("initial estimate must be finite".into()));
        }
    }
    let n = channels.len() as u64;
    let slot = channels
        .iter()
        .map(|c| cycle_duration(c.protocol, servo))
        .fold(0.0, f64::max)
        + servo.switch_time_s;

    channels
        .par_iter()
        .enumerate()
        .map(|(i, channel)| {
            let slots: Vec<(u64, f64)> = (0..servo.n_cycles as u64)
                .filter(|c| c % n == i as u64)
                .map(|c| (c, c as f64 * slot))
                .collect();
            let samples = lock(channel, servo, &slots, &mut stream_rng(seed, i as u64))?;
            Ok(FrequencySeries {
                transition: channel.protocol.transition.clone(),
                reference_hz: reference_frequency(channel.protocol, channel.generator)?,
                cycle_duration_s: n as f64 * slot,
                samples,
            })
        })
        .collect()
}
