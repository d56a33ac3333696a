//! Scenario execution: static propagation or full simulation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use clockclosure_core::dynamics::{build_generator, Branch, DecaySpec, EvolutionGenerator, NonlinearModel};
use clockclosure_core::interrogation::{
    detuning_grid, fit_center, run_interleaved, scan_fringe, AtomCount, FitResult, FrequencySeries, FringeCurve,
    LineshapeModel, NoiseSettings, RamseyProtocol, ServoChannel, ServoSettings,
};
use clockclosure_core::rng::{derive_seed, trial_seed};
use clockclosure_core::spectra::{load_level_table, vacuum_wavelength, ClosureCycle, LevelTable, TransitionKey};
use clockclosure_core::stats::{
    allan_deviation, closure_estimate, sensitivity_projection, series_measurement, settle_cycles, AllanPoint,
    ClosureEstimate, Measurement,
};

use crate::config::{LoadedConfig, Mode, ScenarioConfig};
use crate::data;
use crate::error::CliError;
use crate::report::{
    AllanEntry, ClosureReport, CycleReport, Interpretations, LegReport, Projection, ProjectionPoint, Provenance,
    Reading, Report, ServoSummary, ToolInfo, TransitionReport, TrialEntry, TrialSummary,
};

/// Half-width of the acquisition scan in units of its fringe period.
const SCAN_HALF_WIDTH_PERIODS: f64 = 0.75;
/// Default ratio of servo dark time to acquisition-scan dark time.
const SCAN_DARK_TIME_DIVISOR: f64 = 8.0;

/// A configuration resolved against its level table.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub table: LevelTable,
    pub cycle: ClosureCycle,
    pub levels_path: PathBuf,
    generator: Option<EvolutionGenerator>,
}

/// Result of one simulated transition.
#[derive(Clone, Debug)]
pub struct TransitionRun {
    pub transition: TransitionKey,
    pub scan: FringeCurve,
    pub fit: FitResult,
    pub series: FrequencySeries,
    pub settle_cycles: usize,
    pub measurement: Measurement,
    pub allan: Vec<AllanPoint>,
}

/// One complete simulated closure measurement.
#[derive(Clone, Debug)]
pub struct SimulationRun {
    pub seed: u64,
    pub transitions: Vec<TransitionRun>,
    pub estimate: ClosureEstimate,
}

impl Scenario {
    /// Loads the level table and checks the cycle and nonlinear settings.
    pub fn prepare(config: ScenarioConfig, base_dir: Option<&Path>) -> Result<Scenario, CliError> {
        let origin = config.name.clone();
        let levels_path = data::resolve(Path::new(&config.levels), base_dir, "levels")
            .ok_or_else(|| CliError::config(&origin, "levels", format!("level table `{}` not found", config.levels)))?;
        let table = load_level_table(&levels_path)
            .map_err(|e| CliError::data(format!("level table {}", levels_path.display()), e))?;

        let mut keys = Vec::with_capacity(config.cycle.len());
        for (i, k) in config.cycle.iter().enumerate() {
            let key: TransitionKey =
                k.parse().map_err(|e: clockclosure_core::SpectraError| CliError::config(&origin, format!("cycle[{i}]"), e.to_string()))?;
            let key = table
                .resolve_key(&key)
                .map_err(|e| CliError::config(&origin, format!("cycle[{i}]"), e.to_string()))?;
            keys.push(key);
        }
        let cycle = ClosureCycle::from_transitions(&table, &keys)
            .map_err(|e| CliError::config(&origin, "cycle", e.to_string()))?;

        let generator = match config.mode {
            Mode::Static => None,
            Mode::Simulate => Some(build_simulation_generator(&config, &table, &cycle)?),
        };
        Ok(Scenario { config, table, cycle, levels_path, generator })
    }

    /// Static mode: the closure of the table (or overridden) measurements.
    pub fn static_estimate(&self) -> Result<ClosureEstimate, CliError> {
        let origin = &self.config.name;
        let s = &self.config.static_mode;
        let mut measurements = BTreeMap::new();
        for key in self.cycle.transitions() {
            let t = self.table.transition(key).expect("cycle legs are table transitions");
            let o = s.measurements.get(&key.to_string()).cloned().unwrap_or_default();
            let frequency_hz = o
                .frequency_hz
                .or(t.measured_hz)
                .or_else(|| self.table.key_frequency(key).ok())
                .ok_or_else(|| CliError::config(origin, format!("static.measurements.{key}"), "no frequency available"))?;
            let sigma_hz = o.sigma_hz.or(s.sigma_hz).or(t.sigma_hz).ok_or_else(|| {
                CliError::config(origin, format!("static.measurements.{key}.sigma_hz"), "no uncertainty in table or config")
            })?;
            measurements.insert(key.clone(), Measurement { frequency_hz, sigma_hz });
        }
        let est = closure_estimate(&self.cycle, &measurements, self.config.k)?;
        Ok(est.with_correlation_inflation(self.config.correlation_inflation)?)
    }

    /// Simulate mode: acquisition scans, interleaved servo and closure
    /// statistics for one seed.
    pub fn simulate(&self, seed: u64) -> Result<SimulationRun, CliError> {
        let gen = self.generator.as_ref().ok_or_else(|| CliError::Invalid("scenario is not in simulate mode".into()))?;
        let cfg = &self.config.interrogation;
        let keys: Vec<TransitionKey> = self.cycle.transitions().cloned().collect();

        let mut protocols = Vec::with_capacity(keys.len());
        let mut noises = Vec::with_capacity(keys.len());
        for key in &keys {
            let t = cfg.for_transition(&key.to_string());
            protocols.push(RamseyProtocol::new(key.clone(), t.pulse_s, t.dark_time_s)?);
            let atoms = if cfg.projection_noise { AtomCount::Finite(t.n_atoms) } else { AtomCount::Infinite };
            noises.push(NoiseSettings { atoms, lo_white_hz: t.lo_noise_hz });
        }

        let acquisitions: Vec<(FringeCurve, FitResult)> = protocols
            .par_iter()
            .zip(&noises)
            .enumerate()
            .map(|(i, (protocol, noise))| {
                let dark = cfg.scan_dark_time_s.unwrap_or(protocol.dark_time_s / SCAN_DARK_TIME_DIVISOR);
                let scan = RamseyProtocol::new(protocol.transition.clone(), protocol.pulse_s, dark)?;
                let grid = detuning_grid(0.0, SCAN_HALF_WIDTH_PERIODS / dark, cfg.scan_points);
                let curve = scan_fringe(&scan, gen, &grid, noise.atoms, derive_seed(seed, 1 + i as u64))?;
                let fit = fit_center(&curve, LineshapeModel::Symmetric)?;
                Ok((curve, fit))
            })
            .collect::<Result<_, CliError>>()
            .map_err(|e| context(e, "acquisition scan"))?;

        let channels: Vec<ServoChannel> = protocols
            .iter()
            .zip(&noises)
            .zip(&acquisitions)
            .map(|((protocol, noise), (_, fit))| ServoChannel {
                protocol,
                generator: gen,
                noise: *noise,
                initial_hz: fit.center_hz,
            })
            .collect();
        let servo = ServoSettings {
            gain: cfg.gain,
            n_cycles: cfg.n_cycles,
            probe_offset_hz: cfg.probe_offset_hz,
            initial_hz: 0.0,
            dead_time_s: cfg.dead_time_s,
            switch_time_s: cfg.switch_time_s,
        };
        let series = run_interleaved(&channels, &servo, derive_seed(seed, 0)).map_err(|e| context(e.into(), "servo"))?;

        let settle = settle_cycles(cfg.gain);
        let mut transitions = Vec::with_capacity(keys.len());
        let mut measurements = BTreeMap::new();
        for ((key, series), (scan, fit)) in keys.iter().zip(series).zip(acquisitions) {
            let settled = series.skip(settle.min(series.len().saturating_sub(3)));
            let measurement = series_measurement(&settled)?;
            let taus = octave_taus(&settled);
            let allan = allan_deviation(&settled, &taus)?;
            measurements.insert(key.clone(), measurement);
            transitions.push(TransitionRun {
                transition: key.clone(),
                scan,
                fit,
                settle_cycles: series.len() - settled.len(),
                series,
                measurement,
                allan,
            });
        }
        let estimate = closure_estimate(&self.cycle, &measurements, self.config.k)?
            .with_correlation_inflation(self.config.correlation_inflation)?;
        Ok(SimulationRun { seed, transitions, estimate })
    }

    /// Independent Monte Carlo repetitions with seeds `seed ⊕ t`.
    pub fn simulate_trials(&self, seed: u64, trials: u32) -> Result<Vec<SimulationRun>, CliError> {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| self.simulate(trial_seed(seed, t)).map_err(|e| context(e, &format!("trial {t}"))))
            .collect()
    }
}

fn context(e: CliError, what: &str) -> CliError {
    match e {
        CliError::Simulation { context, source } => CliError::Simulation { context: format!("{what}: {context}"), source },
        other => other,
    }
}

/// τ = m·τ₀ for m = 1, 2, 4, … while 3m ≤ N.
fn octave_taus(series: &FrequencySeries) -> Vec<f64> {
    std::iter::successors(Some(1usize), |m| Some(m * 2))
        .take_while(|m| 3 * m <= series.len())
        .map(|m| m as f64 * series.cycle_duration_s)
        .collect()
}

fn build_simulation_generator(
    config: &ScenarioConfig,
    table: &LevelTable,
    cycle: &ClosureCycle,
) -> Result<EvolutionGenerator, CliError> {
    let origin = &config.name;
    let subset: Vec<&str> = cycle.levels().iter().map(String::as_str).collect();
    let nl = &config.nonlinear;

    let mut model = if !nl.potential_hz.is_empty() {
        let mut phi = vec![0.0; subset.len()];
        for (label, v) in &nl.potential_hz {
            let i = subset.iter().position(|l| l == label).ok_or_else(|| {
                CliError::config(origin, format!("nonlinear.potential_hz.{label}"), "not a level of the cycle")
            })?;
            phi[i] = *v;
        }
        NonlinearModel::level_decomposable(&phi)
    } else if !nl.coupling_hz.is_empty() {
        let mut order = Vec::with_capacity(subset.len());
        for label in &subset {
            let i = nl.coupling_levels.iter().position(|l| l == label).ok_or_else(|| {
                CliError::config(origin, "nonlinear.coupling_levels", format!("missing cycle level `{label}`"))
            })?;
            order.push(i);
        }
        if nl.coupling_levels.len() != subset.len() {
            return Err(CliError::config(origin, "nonlinear.coupling_levels", "must list exactly the cycle levels"));
        }
        let g = order.iter().map(|&r| order.iter().map(|&c| nl.coupling_hz[r][c]).collect()).collect();
        NonlinearModel::none().with_coupling(g)
    } else {
        Ok(NonlinearModel::none())
    }
    .map_err(|e| CliError::config(origin, "nonlinear", e.to_string()))?;

    for (k, v) in &nl.anomalies_hz {
        let key: TransitionKey = k
            .parse()
            .map_err(|e: clockclosure_core::SpectraError| CliError::config(origin, format!("nonlinear.anomalies_hz.{k}"), e.to_string()))?;
        let key = table
            .resolve_key(&key)
            .ok()
            .filter(|key| cycle.transitions().any(|t| t == key))
            .ok_or_else(|| CliError::config(origin, format!("nonlinear.anomalies_hz.{k}"), "not a transition of the cycle"))?;
        model = model.with_anomaly(key, *v);
    }

    let branching = &config.interrogation.branching;
    let (decay, field) = match (config.interrogation.decay, branching.is_empty()) {
        (false, _) => (DecaySpec::Off, "interrogation.decay"),
        (true, true) => (DecaySpec::FromLifetimes, "interrogation.decay"),
        (true, false) => (
            DecaySpec::Branching(
                branching
                    .iter()
                    .map(|b| Branch { upper: b.upper.clone(), lower: b.lower.clone(), fraction: b.fraction })
                    .collect(),
            ),
            "interrogation.branching",
        ),
    };
    build_generator(table, &subset, vec![], model, &decay).map_err(|e| CliError::config(origin, field, e.to_string()))
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::data(format!("reading {}", path.display()), e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Options of `clockclosure run`.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Runs a loaded scenario and writes its output directory.
pub fn run_scenario(loaded: &LoadedConfig, options: &RunOptions) -> Result<RunOutcome, CliError> {
    let mut config = loaded.config.clone();
    if let Some(seed) = options.seed {
        config.seed = seed;
    }
    let out_dir = options
        .out_dir
        .clone()
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&config.name));
    let scenario = Scenario::prepare(config, loaded.dir())?;
    let config = &scenario.config;

    let provenance = Provenance {
        seed: config.seed,
        config_path: loaded.path.display().to_string(),
        config_sha256: hex::encode(Sha256::digest(loaded.text.as_bytes())),
        levels_path: scenario.levels_path.display().to_string(),
        levels_sha256: sha256_file(&scenario.levels_path)?,
    };
    let legs = scenario
        .cycle
        .legs()
        .iter()
        .map(|leg| {
            let f = scenario.table.key_frequency(&leg.transition)?;
            Ok(LegReport {
                transition: leg.transition.to_string(),
                sign: leg.sign.as_i8(),
                table_frequency_hz: f,
                vacuum_wavelength_nm: vacuum_wavelength(f)?,
            })
        })
        .collect::<Result<Vec<_>, clockclosure_core::SpectraError>>()?;
    let cycle_report = CycleReport {
        expression: scenario.cycle.to_string(),
        levels: scenario.cycle.levels().to_vec(),
        legs,
    };

    fs::create_dir_all(&out_dir).map_err(|source| CliError::Output { path: out_dir.clone(), source })?;
    let mut files = Vec::new();

    let mut report = Report {
        tool: ToolInfo::current(),
        generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        scenario: config.clone(),
        provenance,
        system: scenario.table.system().to_string(),
        cycle: cycle_report,
        frequency_convention: "absolute",
        transitions: Vec::new(),
        closure: None,
        interpretations: None,
        projection: None,
        trials: None,
    };

    match config.mode {
        Mode::Static => {
            let est = scenario.static_estimate()?;
            report.transitions = est
                .inputs
                .iter()
                .map(|i| TransitionReport {
                    transition: i.transition.to_string(),
                    reference_hz: scenario.table.key_frequency(&i.transition).unwrap_or(f64::NAN),
                    dark_time_s: None,
                    acquisition_fit: None,
                    servo: None,
                    allan: Vec::new(),
                    frequency_hz: i.frequency_hz,
                    sigma_hz: i.sigma_hz,
                })
                .collect();
            report.interpretations = config.static_mode.quoted_accuracy_hz.map(|q| {
                let per = (est.inputs.len() as f64).sqrt() * q;
                Interpretations {
                    quoted_accuracy_hz: q,
                    per_transition: Reading { sigma_hz: per, bound_hz: est.delta_hz.abs() + est.k * per },
                    closure_level: Reading { sigma_hz: q, bound_hz: est.delta_hz.abs() + est.k * q },
                }
            });
            report.closure = Some(ClosureReport::from_estimate(&est));
        }
        Mode::Simulate => {
            let runs = scenario.simulate_trials(config.seed, config.trials)?;
            let primary = &runs[0];
            report.frequency_convention = "offset_from_reference";
            report.transitions = primary.transitions.iter().map(|t| transition_report(&scenario, t)).collect();
            report.closure = Some(ClosureReport::from_estimate(&primary.estimate));
            report.projection = Some(projection(primary, config.interrogation.n_cycles)?);
            if runs.len() > 1 {
                report.trials = Some(trial_summary(&runs));
            }
            for t in &primary.transitions {
                let key = t.transition.to_string();
                files.push(write_with(&out_dir.join(format!("series_{key}.csv")), |w| {
                    FrequencySeries::write_csv(std::slice::from_ref(&t.series), w).map_err(|e| e.to_string())
                })?);
                files.push(write_with(&out_dir.join(format!("allan_{key}.csv")), |w| {
                    write_allan_csv(w, &t.allan).map_err(|e| e.to_string())
                })?);
                files.push(write_with(&out_dir.join(format!("fringe_{key}.csv")), |w| {
                    t.scan.write_csv(w).map_err(|e| e.to_string())
                })?);
            }
        }
    }

    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let report_path = out_dir.join("report.json");
    fs::write(&report_path, json + "\n").map_err(|source| CliError::Output { path: report_path.clone(), source })?;
    files.insert(0, report_path);
    Ok(RunOutcome { report, out_dir, files })
}

fn transition_report(scenario: &Scenario, t: &TransitionRun) -> TransitionReport {
    let values = t.series.values();
    let settled = &values[t.settle_cycles..];
    let mean = settled.iter().sum::<f64>() / settled.len() as f64;
    let sd = (settled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (settled.len().max(2) - 1) as f64).sqrt();
    let reference = t.series.reference_hz;
    TransitionReport {
        transition: t.transition.to_string(),
        reference_hz: reference,
        dark_time_s: Some(scenario.config.interrogation.for_transition(&t.transition.to_string()).dark_time_s),
        acquisition_fit: Some(t.fit.clone()),
        servo: Some(ServoSummary {
            samples: t.series.len(),
            settle_cycles: t.settle_cycles,
            cycle_duration_s: t.series.cycle_duration_s,
            first_cycle: t.series.samples.first().map(|s| s.cycle).unwrap_or(0),
            last_cycle: t.series.samples.last().map(|s| s.cycle).unwrap_or(0),
            mean_offset_hz: t.measurement.frequency_hz,
            sigma_mean_hz: t.measurement.sigma_hz,
            per_cycle_sd_hz: sd,
        }),
        allan: t
            .allan
            .iter()
            .map(|p| AllanEntry { tau_s: p.tau_s, sigma_hz: p.sigma, sigma_y: p.sigma / reference, n: p.n })
            .collect(),
        frequency_hz: t.measurement.frequency_hz,
        sigma_hz: t.measurement.sigma_hz,
    }
}

fn projection(run: &SimulationRun, n_cycles: usize) -> Result<Projection, CliError> {
    let n = run.transitions.len();
    // σ_cycle such that σ_cycle/√N reproduces each transition's σ of the mean.
    let sigma_cycle = (run
        .transitions
        .iter()
        .map(|t| {
            let used = (t.series.len() - t.settle_cycles) as f64;
            t.measurement.sigma_hz.powi(2) * used
        })
        .sum::<f64>()
        / n as f64)
        .sqrt();
    let slot = run.transitions[0].series.cycle_duration_s / n as f64;
    let run_time = n_cycles as f64 * slot;
    let points = [run_time, 1e4, 1e5]
        .iter()
        .map(|&total| {
            Ok(ProjectionPoint {
                total_time_s: total,
                sigma_delta_hz: sensitivity_projection(sigma_cycle, slot, total, n as u32)?,
            })
        })
        .collect::<Result<_, CliError>>()?;
    Ok(Projection { sigma_cycle_hz: sigma_cycle, cycle_time_s: slot, n_transitions: n as u32, points })
}

fn trial_summary(runs: &[SimulationRun]) -> TrialSummary {
    let n = runs.len() as f64;
    let within = runs.iter().filter(|r| r.estimate.delta_hz.abs() < 3.0 * r.estimate.sigma_hz).count() as u32;
    TrialSummary {
        n: runs.len() as u32,
        within_3_sigma: within,
        mean_delta_hz: runs.iter().map(|r| r.estimate.delta_hz).sum::<f64>() / n,
        mean_sigma_hz: runs.iter().map(|r| r.estimate.sigma_hz).sum::<f64>() / n,
        pull_rms: (runs.iter().map(|r| (r.estimate.delta_hz / r.estimate.sigma_hz).powi(2)).sum::<f64>() / n).sqrt(),
        runs: runs
            .iter()
            .map(|r| TrialEntry { seed: r.seed, delta_hz: r.estimate.delta_hz, sigma_hz: r.estimate.sigma_hz })
            .collect(),
    }
}

/// Allan table with header `tau_s,sigma_y,n`; values are in Hz, flagged by
/// a leading `# units: hz` comment.
pub fn write_allan_csv<W: std::io::Write>(mut out: W, points: &[AllanPoint]) -> std::io::Result<()> {
    writeln!(out, "# units: hz")?;
    writeln!(out, "tau_s,sigma_y,n")?;
    for p in points {
        writeln!(out, "{},{},{}", p.tau_s, p.sigma, p.n)?;
    }
    Ok(())
}

fn write_with(
    path: &Path,
    write: impl FnOnce(&mut Vec<u8>) -> Result<(), String>,
) -> Result<PathBuf, CliError> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| CliError::Output { path: path.to_path_buf(), source: std::io::Error::other(e) })?;
    fs::write(path, buf).map_err(|source| CliError::Output { path: path.to_path_buf(), source })?;
    Ok(path.to_path_buf())
}
