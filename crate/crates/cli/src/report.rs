//! The machine-readable `report.json`.

use serde::Serialize;

use clockclosure_core::interrogation::FitResult;
use clockclosure_core::stats::ClosureEstimate;

use crate::config::ScenarioConfig;

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: ToolInfo,
    /// Wall-clock time of the run; the only field that varies between
    /// identical runs.
    pub generated_at: String,
    pub scenario: ScenarioConfig,
    pub provenance: Provenance,
    pub system: String,
    pub cycle: CycleReport,
    /// `absolute` in static mode; `offset_from_reference` when simulated
    /// frequencies are reported relative to each transition's table value.
    pub frequency_convention: &'static str,
    pub transitions: Vec<TransitionReport>,
    pub closure: Option<ClosureReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interpretations: Option<Interpretations>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection: Option<Projection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<TrialSummary>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

impl ToolInfo {
    pub fn current() -> Self {
        ToolInfo { name: "clockclosure", version: env!("CARGO_PKG_VERSION") }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_path: String,
    pub config_sha256: String,
    pub levels_path: String,
    pub levels_sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CycleReport {
    pub expression: String,
    pub levels: Vec<String>,
    pub legs: Vec<LegReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LegReport {
    pub transition: String,
    pub sign: i8,
    pub table_frequency_hz: f64,
    pub vacuum_wavelength_nm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransitionReport {
    pub transition: String,
    pub reference_hz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dark_time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acquisition_fit: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub servo: Option<ServoSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub allan: Vec<AllanEntry>,
    pub frequency_hz: f64,
    pub sigma_hz: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ServoSummary {
    pub samples: usize,
    pub settle_cycles: usize,
    pub cycle_duration_s: f64,
    pub first_cycle: u64,
    pub last_cycle: u64,
    pub mean_offset_hz: f64,
    pub sigma_mean_hz: f64,
    pub per_cycle_sd_hz: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AllanEntry {
    pub tau_s: f64,
    pub sigma_hz: f64,
    /// σ_hz divided by the transition frequency.
    pub sigma_y: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosureReport {
    pub cycle: String,
    pub signs: Vec<i8>,
    pub delta_hz: f64,
    pub sigma_hz: f64,
    pub independent_sigma_hz: f64,
    pub correlation_inflation: f64,
    pub k: f64,
    pub bound_hz: f64,
    pub inputs: Vec<ClosureInputReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosureInputReport {
    pub transition: String,
    pub sign: i8,
    pub frequency_hz: f64,
    pub sigma_hz: f64,
}

impl ClosureReport {
    pub fn from_estimate(est: &ClosureEstimate) -> Self {
        ClosureReport {
            cycle: est.cycle.to_string(),
            signs: est.inputs.iter().map(|i| i.sign).collect(),
            delta_hz: est.delta_hz,
            sigma_hz: est.sigma_hz,
            independent_sigma_hz: est.independent_sigma_hz(),
            correlation_inflation: est.inflation,
            k: est.k,
            bound_hz: est.bound_hz(),
            inputs: est
                .inputs
                .iter()
                .map(|i| ClosureInputReport {
                    transition: i.transition.to_string(),
                    sign: i.sign,
                    frequency_hz: i.frequency_hz,
                    sigma_hz: i.sigma_hz,
                })
                .collect(),
        }
    }
}

/// Two readings of a quoted literature accuracy.
#[derive(Clone, Debug, Serialize)]
pub struct Interpretations {
    pub quoted_accuracy_hz: f64,
    /// The accuracy applies to each transition: σ_Δ = √n·quoted.
    pub per_transition: Reading,
    /// The accuracy already applies to the closure: σ_Δ = quoted.
    pub closure_level: Reading,
}

#[derive(Clone, Debug, Serialize)]
pub struct Reading {
    pub sigma_hz: f64,
    pub bound_hz: f64,
}

/// White-noise projection calibrated on the simulated run.
#[derive(Clone, Debug, Serialize)]
pub struct Projection {
    /// Per-cycle σ of one transition, inferred from the uncertainty of its mean.
    pub sigma_cycle_hz: f64,
    /// Duration of one single-transition slot.
    pub cycle_time_s: f64,
    pub n_transitions: u32,
    pub points: Vec<ProjectionPoint>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionPoint {
    pub total_time_s: f64,
    pub sigma_delta_hz: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialSummary {
    pub n: u32,
    /// Runs with |Δ̂| < 3σ_Δ.
    pub within_3_sigma: u32,
    pub mean_delta_hz: f64,
    pub mean_sigma_hz: f64,
    pub pull_rms: f64,
    pub runs: Vec<TrialEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialEntry {
    pub seed: u64,
    pub delta_hz: f64,
    pub sigma_hz: f64,
}
