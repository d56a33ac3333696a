use serde::{Deserialize, Serialize};

use crate::interrogation::FrequencySeries;

use super::StatsError;

/// Relative tolerance when matching τ to a multiple of the cycle duration.
const MULTIPLE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllanUnits {
    Hz,
    Fractional,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllanPoint {
    pub tau_s: f64,
    pub sigma: f64,
    /// Number of window-mean differences averaged into σ.
    pub n: usize,
    pub units: AllanUnits,
}

impl AllanPoint {
    /// The same point divided by a carrier frequency.
    pub fn to_fractional(self, carrier_hz: f64) -> AllanPoint {
        match self.units {
            AllanUnits::Fractional => self,
            AllanUnits::Hz => AllanPoint { sigma: self.sigma / carrier_hz, units: AllanUnits::Fractional, ..self },
        }
    }
}

/// Overlapping Allan deviation of `series` at one averaging time, in Hz.
///
/// With m = τ/τ₀ and window means ȳₖ over samples k..k+m,
/// σ²(τ) = ½·mean over k of (ȳₖ₊ₘ − ȳₖ)², k = 0..N−2m.
pub fn allan_point(series: &FrequencySeries, tau_s: f64) -> Result<AllanPoint, StatsError> {
    let n = series.len();
    if n < 3 {
        return Err(StatsError::InsufficientData(format!("{n} samples; at least 3 required")));
    }
    let tau0 = series.cycle_duration_s;
    if !(tau0 > 0.0) || !tau0.is_finite() {
        return Err(StatsError::InsufficientData(format!("cycle duration {tau0} s must be positive")));
    }
    if !(tau_s > 0.0) || !tau_s.is_finite() {
        return Err(StatsError::InvalidInput(format!("averaging time {tau_s} s must be positive")));
    }
    let ratio = tau_s / tau0;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > MULTIPLE_TOLERANCE * ratio {
        return Err(StatsError::NotAMultiple { tau: tau_s, cycle: tau0 });
    }
    let m = m as usize;
    if 3 * m > n {
        return Err(StatsError::TauTooLong { tau: tau_s, max: (n / 3) as f64 * tau0 });
    }

    // Prefix sums of the series centred on its first sample, so that a
    // constant series gives exactly zero.
    let y0 = series.samples[0].frequency_hz;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for s in &series.samples {
        acc += s.frequency_hz - y0;
        prefix.push(acc);
    }
    let terms = n - 2 * m + 1;
    let inv_m = 1.0 / m as f64;
    let sum_sq: f64 = (0..terms)
        .map(|k| {
            let first = (prefix[k + m] - prefix[k]) * inv_m;
            let second = (prefix[k + 2 * m] - prefix[k + m]) * inv_m;
            (second - first).powi(2)
        })
        .sum();
    Ok(AllanPoint {
        tau_s: m as f64 * tau0,
        sigma: (0.5 * sum_sq / terms as f64).sqrt(),
        n: terms,
        units: AllanUnits::Hz,
    })
}

/// Overlapping Allan deviation at each requested τ. Fails on the first τ
/// that is not a multiple of the cycle duration or exceeds a third of the
/// series.
pub fn allan_deviation(series: &FrequencySeries, taus_s: &[f64]) -> Result<Vec<AllanPoint>, StatsError> {
    taus_s.iter().map(|&tau| allan_point(series, tau)).collect()
}
