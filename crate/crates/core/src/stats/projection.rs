use crate::interrogation::FrequencySeries;

use super::allan::allan_point;
use super::closure::Measurement;
use super::StatsError;

/// Projected closure uncertainty for white frequency noise: each of the
/// `n_transitions` lines gets T/(n·t_cycle) cycles, and the n independent
/// means add in quadrature, σ_Δ = √n·σ_cycle/√(T/(n·t_cycle)).
pub fn sensitivity_projection(
    sigma_cycle_hz: f64,
    cycle_time_s: f64,
    total_time_s: f64,
    n_transitions: u32,
) -> Result<f64, StatsError> {
    for (name, v) in [("per-cycle σ", sigma_cycle_hz), ("cycle time", cycle_time_s), ("total time", total_time_s)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(StatsError::InvalidInput(format!("{name} must be positive, got {v}")));
        }
    }
    if n_transitions == 0 {
        return Err(StatsError::InvalidInput("at least one transition required".into()));
    }
    let n = n_transitions as f64;
    let cycles_each = total_time_s / (n * cycle_time_s);
    Ok(n.sqrt() * sigma_cycle_hz / cycles_each.sqrt())
}

/// Cycles for a servo of gain `g` to shrink an initial error by 10³,
/// ⌈ln 10⁻³ / ln(1 − g)⌉ (one cycle for g = 1).
pub fn settle_cycles(gain: f64) -> usize {
    if gain >= 1.0 {
        1
    } else {
        ((1e-3f64).ln() / (1.0 - gain).ln()).ceil().max(1.0) as usize
    }
}

/// Mean of a (settled) series and the uncertainty of that mean, estimated
/// from the Allan deviation at m = max(1, N/10) cycles as σ(mτ₀)·√(m/N).
/// Using a long averaging time keeps short-range servo correlations out of
/// the estimate.
pub fn series_measurement(series: &FrequencySeries) -> Result<Measurement, StatsError> {
    let n = series.len();
    if n < 3 {
        return Err(StatsError::InsufficientData(format!("{n} samples; at least 3 required")));
    }
    let values = series.values();
    let mean = values.iter().sum::<f64>() / n as f64;
    let m = (n / 10).max(1);
    let adev = allan_point(series, m as f64 * series.cycle_duration_s)?;
    Ok(Measurement { frequency_hz: mean, sigma_hz: adev.sigma * (m as f64 / n as f64).sqrt() })
}
