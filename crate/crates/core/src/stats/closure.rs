use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::spectra::{ClosureCycle, TransitionKey};

use super::StatsError;

/// A frequency estimate with its 1σ uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub frequency_hz: f64,
    pub sigma_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureInput {
    pub transition: TransitionKey,
    pub sign: i8,
    pub frequency_hz: f64,
    pub sigma_hz: f64,
}

/// Signed sum of measured frequencies around a cycle.
///
/// `sigma_hz` is √(Σσᵢ²) times `inflation`, which stays 1 unless a
/// correlated-noise allowance is applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureEstimate {
    pub cycle: ClosureCycle,
    pub delta_hz: f64,
    pub sigma_hz: f64,
    pub inputs: Vec<ClosureInput>,
    pub k: f64,
    pub inflation: f64,
}

impl ClosureEstimate {
    /// Upper limit |Δ̂| + k·σ_Δ on the magnitude of the closure defect.
    pub fn bound_hz(&self) -> f64 {
        self.delta_hz.abs() + self.k * self.sigma_hz
    }

    /// σ_Δ from independent inputs, before inflation.
    pub fn independent_sigma_hz(&self) -> f64 {
        self.sigma_hz / self.inflation
    }

    /// Multiplies σ_Δ by `factor` (≥ 1) to allow for noise shared between
    /// the transitions.
    pub fn with_correlation_inflation(mut self, factor: f64) -> Result<Self, StatsError> {
        if !(factor >= 1.0) || !factor.is_finite() {
            return Err(StatsError::InvalidInput(format!("inflation factor {factor} must be ≥ 1")));
        }
        self.sigma_hz = self.independent_sigma_hz() * factor;
        self.inflation = factor;
        Ok(self)
    }

    /// |Δ̂| / σ_Δ.
    pub fn significance(&self) -> f64 {
        self.delta_hz.abs() / self.sigma_hz
    }
}

/// Δ̂ = Σ signᵢ f̂ᵢ with σ_Δ = √(Σ σᵢ²), assuming independent inputs.
pub fn closure_estimate(
    cycle: &ClosureCycle,
    measurements: &BTreeMap<TransitionKey, Measurement>,
    k: f64,
) -> Result<ClosureEstimate, StatsError> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(StatsError::InvalidInput(format!("confidence multiple {k} must be ≥ 0")));
    }
    let mut inputs = Vec::with_capacity(cycle.len());
    for leg in cycle.legs() {
        let m = measurements
            .get(&leg.transition)
            .ok_or_else(|| StatsError::MissingTransition(leg.transition.clone()))?;
        if !m.frequency_hz.is_finite() {
            return Err(StatsError::InvalidInput(format!("frequency of `{}` is not finite", leg.transition)));
        }
        if !(m.sigma_hz > 0.0) || !m.sigma_hz.is_finite() {
            return Err(StatsError::InvalidInput(format!(
                "uncertainty of `{}` must be positive, got {}",
                leg.transition, m.sigma_hz
            )));
        }
        inputs.push(ClosureInput {
            transition: leg.transition.clone(),
            sign: leg.sign.as_i8(),
            frequency_hz: m.frequency_hz,
            sigma_hz: m.sigma_hz,
        });
    }
    let delta_hz = inputs.iter().map(|i| i.sign as f64 * i.frequency_hz).sum();
    let sigma_hz = inputs.iter().map(|i| i.sigma_hz * i.sigma_hz).sum::<f64>().sqrt();
    Ok(ClosureEstimate { cycle: cycle.clone(), delta_hz, sigma_hz, inputs, k, inflation: 1.0 })
}
