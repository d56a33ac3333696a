//! Scenario configuration files (TOML).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Full dynamics, interleaved servo and statistics.
    Simulate,
    /// Propagates measured frequencies and uncertainties from the table.
    Static,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub mode: Mode,
    /// Level-table CSV.
    pub levels: String,
    /// Transition keys (`lower-upper`) forming the closure cycle.
    pub cycle: Vec<String>,
    pub seed: u64,
    /// Confidence multiple for the reported bound |Δ̂| + k·σ_Δ.
    #[serde(default = "default_k")]
    pub k: f64,
    /// Factor ≥ 1 applied to σ_Δ for noise shared between transitions.
    #[serde(default = "one")]
    pub correlation_inflation: f64,
    /// Monte Carlo repetitions; trial t uses seed ⊕ t.
    #[serde(default = "one_u32")]
    pub trials: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub interrogation: InterrogationConfig,
    #[serde(default)]
    pub nonlinear: NonlinearConfig,
    #[serde(default, rename = "static")]
    pub static_mode: StaticConfig,
}

fn default_k() -> f64 {
    2.0
}

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterrogationConfig {
    pub dark_time_s: f64,
    pub pulse_s: f64,
    pub n_atoms: u32,
    /// Binomial projection noise on each shot.
    pub projection_noise: bool,
    /// Total servo cycles, shared round-robin by the cycle transitions.
    pub n_cycles: usize,
    pub gain: f64,
    /// White frequency noise of the probe laser per cycle, Hz.
    pub lo_noise_hz: f64,
    pub dead_time_s: f64,
    pub switch_time_s: f64,
    pub decay: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_offset_hz: Option<f64>,
    pub scan_points: usize,
    /// Dark time of the acquisition scan; defaults to dark_time_s / 8.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_dark_time_s: Option<f64>,
    pub transitions: BTreeMap<String, TransitionOverride>,
    /// Decay branches replacing the default single channel to the lowest
    /// level for the listed upper levels.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub branching: Vec<BranchConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchConfig {
    pub upper: String,
    pub lower: String,
    pub fraction: f64,
}

impl Default for InterrogationConfig {
    fn default() -> Self {
        InterrogationConfig {
            dark_time_s: 0.5,
            pulse_s: 1e-3,
            n_atoms: 1000,
            projection_noise: true,
            n_cycles: 600,
            gain: 0.5,
            lo_noise_hz: 0.1,
            dead_time_s: 0.0,
            switch_time_s: 0.0,
            decay: true,
            probe_offset_hz: None,
            scan_points: 31,
            scan_dark_time_s: None,
            transitions: BTreeMap::new(),
            branching: Vec::new(),
        }
    }
}

/// Per-transition replacements for the shared interrogation settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dark_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_atoms: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo_noise_hz: Option<f64>,
}

/// Settings of one transition after applying overrides.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionSettings {
    pub dark_time_s: f64,
    pub pulse_s: f64,
    pub n_atoms: u32,
    pub lo_noise_hz: f64,
}

impl InterrogationConfig {
    pub fn for_transition(&self, key: &str) -> TransitionSettings {
        let o = self.transitions.get(key).cloned().unwrap_or_default();
        TransitionSettings {
            dark_time_s: o.dark_time_s.unwrap_or(self.dark_time_s),
            pulse_s: o.pulse_s.unwrap_or(self.pulse_s),
            n_atoms: o.n_atoms.unwrap_or(self.n_atoms),
            lo_noise_hz: o.lo_noise_hz.unwrap_or(self.lo_noise_hz),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearConfig {
    /// Kinematic frequency anomalies ε per transition key, Hz.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub anomalies_hz: BTreeMap<String, f64>,
    /// Level potential φ (Hz) giving the decomposable coupling G_kj = φ_k − φ_j.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub potential_hz: BTreeMap<String, f64>,
    /// Level order of `coupling_hz`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub coupling_levels: Vec<String>,
    /// Population-coupling matrix G in Hz.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub coupling_hz: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StaticConfig {
    /// Uniform σ replacing the table uncertainties.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_hz: Option<f64>,
    /// Literature accuracy whose meaning (per transition or per closure)
    /// is ambiguous; both readings are reported.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quoted_accuracy_hz: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub measurements: BTreeMap<String, MeasurementOverride>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_hz: Option<f64>,
}

/// A parsed configuration with its source.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub path: PathBuf,
    pub text: String,
}

impl LoadedConfig {
    pub fn dir(&self) -> Option<&Path> {
        self.path.parent()
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<ScenarioConfig, CliError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let field = match e.span() {
                Some(span) => {
                    let line = text[..span.start.min(text.len())].lines().count().max(1);
                    format!("line {line}")
                }
                None => "(document)".to_string(),
            };
            CliError::config(origin, field, message)
        })?;
        config.validate(origin)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(&origin, "(file)", e.to_string()))?;
        let config = ScenarioConfig::from_toml(&text, &origin)?;
        Ok(LoadedConfig { config, path: path.to_path_buf(), text })
    }

    /// Checks that do not need the level table.
    pub fn validate(&self, origin: &str) -> Result<(), CliError> {
        let err = |field: &str, message: String| Err(CliError::config(origin, field, message));
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.name.trim().is_empty() {
            return err("name", "must not be empty".into());
        }
        if self.cycle.len() < 3 {
            return err("cycle", format!("a closure needs at least 3 transitions, got {}", self.cycle.len()));
        }
        if !(self.k >= 0.0) || !self.k.is_finite() {
            return err("k", format!("must be ≥ 0, got {}", self.k));
        }
        if !(self.correlation_inflation >= 1.0) || !self.correlation_inflation.is_finite() {
            return err("correlation_inflation", format!("must be ≥ 1, got {}", self.correlation_inflation));
        }
        if self.trials == 0 {
            return err("trials", "must be at least 1".into());
        }
        let i = &self.interrogation;
        for (field, v) in [
            ("interrogation.dark_time_s", i.dark_time_s),
            ("interrogation.pulse_s", i.pulse_s),
        ] {
            if !positive(v) {
                return err(field, format!("must be positive, got {v}"));
            }
        }
        for (field, v) in [
            ("interrogation.lo_noise_hz", i.lo_noise_hz),
            ("interrogation.dead_time_s", i.dead_time_s),
            ("interrogation.switch_time_s", i.switch_time_s),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return err(field, format!("must be ≥ 0, got {v}"));
            }
        }
        if !(i.gain > 0.0 && i.gain <= 1.0) {
            return err("interrogation.gain", format!("must lie in (0, 1], got {}", i.gain));
        }
        if i.n_atoms == 0 {
            return err("interrogation.n_atoms", "must be at least 1".into());
        }
        if i.n_cycles < 3 * self.cycle.len() {
            return err(
                "interrogation.n_cycles",
                format!("{} cycles leave fewer than 3 per transition", i.n_cycles),
            );
        }
        if i.scan_points < 7 {
            return err("interrogation.scan_points", format!("need at least 7 points, got {}", i.scan_points));
        }
        if let Some(v) = i.scan_dark_time_s {
            if !positive(v) {
                return err("interrogation.scan_dark_time_s", format!("must be positive, got {v}"));
            }
        }
        if let Some(v) = i.probe_offset_hz {
            if !positive(v) {
                return err("interrogation.probe_offset_hz", format!("must be positive, got {v}"));
            }
        }
        for (key, o) in &i.transitions {
            let field = |name: &str| format!("interrogation.transitions.{key}.{name}");
            if !self.cycle.contains(key) {
                return err(&format!("interrogation.transitions.{key}"), "not a transition of the cycle".into());
            }
            for (name, v) in [("dark_time_s", o.dark_time_s), ("pulse_s", o.pulse_s)] {
                if let Some(v) = v {
                    if !positive(v) {
                        return err(&field(name), format!("must be positive, got {v}"));
                    }
                }
            }
            if let Some(v) = o.lo_noise_hz {
                if !(v >= 0.0) || !v.is_finite() {
                    return err(&field("lo_noise_hz"), format!("must be ≥ 0, got {v}"));
                }
            }
            if o.n_atoms == Some(0) {
                return err(&field("n_atoms"), "must be at least 1".into());
            }
        }
        let nl = &self.nonlinear;
        for (key, v) in &nl.anomalies_hz {
            if !v.is_finite() {
                return err(&format!("nonlinear.anomalies_hz.{key}"), "must be finite".into());
            }
        }
        if !nl.potential_hz.is_empty() && !nl.coupling_hz.is_empty() {
            return err("nonlinear", "give either potential_hz or coupling_hz, not both".into());
        }
        if nl.coupling_levels.len() != nl.coupling_hz.len() {
            return err(
                "nonlinear.coupling_hz",
                format!("{} rows for {} coupling_levels", nl.coupling_hz.len(), nl.coupling_levels.len()),
            );
        }
        if nl.coupling_hz.iter().any(|row| row.len() != nl.coupling_levels.len()) {
            return err("nonlinear.coupling_hz", "matrix must be square over coupling_levels".into());
        }
        let s = &self.static_mode;
        for (field, v) in [("static.sigma_hz", s.sigma_hz), ("static.quoted_accuracy_hz", s.quoted_accuracy_hz)] {
            if let Some(v) = v {
                if !positive(v) {
                    return err(field, format!("must be positive, got {v}"));
                }
            }
        }
        for (key, m) in &s.measurements {
            if !self.cycle.contains(key) {
                return err(&format!("static.measurements.{key}"), "not a transition of the cycle".into());
            }
            if let Some(v) = m.sigma_hz {
                if !positive(v) {
                    return err(&format!("static.measurements.{key}.sigma_hz"), format!("must be positive, got {v}"));
                }
            }
        }
        Ok(())
    }
}
