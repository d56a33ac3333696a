//! Lindblad generator assembly in the rotating frame of the applied drives.
//!
//! Hamiltonians are carried as H/ħ in rad/s. Each drive couples one
//! (lower, upper) pair with `(Ω/2)·e^{iφ}|u⟩⟨l| + h.c.` (rotating-wave
//! approximation). The frame assigns every level a diagonal term chosen so
//! that for each driven pair `h_u − h_l = −δ + 2π·ε`, where `δ` is the drive
//! detuning from the table frequency and `ε` the kinematic anomaly in Hz
//! injected on that transition. The nonlinear term adds
//! `2π·Σⱼ G_kj ρ_jj` to level k.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::spectra::{LevelTable, TransitionKey};

use super::{DensityMatrix, DynamicsError};

/// A coherent drive on one transition, active during `[start, end)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveTerm {
    pub lower: usize,
    pub upper: usize,
    /// Rabi frequency Ω, rad/s.
    pub rabi_rad_s: f64,
    /// Laser detuning from the table transition frequency, rad/s.
    pub detuning_rad_s: f64,
    pub phase_rad: f64,
    pub start_s: f64,
    pub end_s: f64,
}

impl DriveTerm {
    /// A drive that is on for all times.
    pub fn continuous(lower: usize, upper: usize, rabi_rad_s: f64, detuning_rad_s: f64) -> Self {
        DriveTerm {
            lower,
            upper,
            rabi_rad_s,
            detuning_rad_s,
            phase_rad: 0.0,
            start_s: f64::NEG_INFINITY,
            end_s: f64::INFINITY,
        }
    }

    pub fn window(mut self, start_s: f64, end_s: f64) -> Self {
        self.start_s = start_s;
        self.end_s = end_s;
        self
    }

    pub fn active_at(&self, t: f64) -> bool {
        t >= self.start_s && t < self.end_s
    }

    fn coupling(&self) -> Complex64 {
        Complex64::from_polar(0.5 * self.rabi_rad_s, self.phase_rad)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayChannel {
    pub upper: usize,
    pub lower: usize,
    /// Rate γ, s⁻¹.
    pub rate: f64,
}

/// Fraction of an upper level's total decay rate that goes to `lower`.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub upper: String,
    pub lower: String,
    pub fraction: f64,
}

/// Which spontaneous-decay channels a generator carries.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum DecaySpec {
    /// No dissipation.
    #[default]
    Off,
    /// Every level above the lowest decays at 1/lifetime to the lowest level.
    FromLifetimes,
    /// As `FromLifetimes`, but listed upper levels split their rate over the
    /// given branches (fractions summing to 1).
    Branching(Vec<Branch>),
}

/// State-dependent and kinematic departures from linear dynamics.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct NonlinearModel {
    coupling_hz: Option<Vec<Vec<f64>>>,
    anomalies_hz: BTreeMap<TransitionKey, f64>,
}

impl NonlinearModel {
    pub fn none() -> Self {
        NonlinearModel::default()
    }

    /// Population-coupling matrix G in Hz; level k is shifted by Σⱼ G_kj ρ_jj.
    pub fn with_coupling(mut self, coupling_hz: Vec<Vec<f64>>) -> Result<Self, DynamicsError> {
        let n = coupling_hz.len();
        if coupling_hz.iter().any(|row| row.len() != n) {
            return Err(DynamicsError::InvalidModel("coupling matrix must be square".into()));
        }
        if coupling_hz.iter().flatten().any(|g| !g.is_finite()) {
            return Err(DynamicsError::InvalidModel("coupling matrix must be finite".into()));
        }
        self.coupling_hz = Some(coupling_hz);
        Ok(self)
    }

    /// The coupling G_kj = φ_k − φ_j built from a level potential φ (Hz).
    ///
    /// Its transition shifts are φ_u − φ_l for every state, so it cannot
    /// violate any closure.
    pub fn level_decomposable(potential_hz: &[f64]) -> Result<Self, DynamicsError> {
        let g = potential_hz
            .iter()
            .map(|pk| potential_hz.iter().map(|pj| pk - pj).collect())
            .collect();
        NonlinearModel::none().with_coupling(g)
    }

    /// Adds `hz` to the true frequency of `key`.
    pub fn with_anomaly(mut self, key: TransitionKey, hz: f64) -> Self {
        self.anomalies_hz.insert(key, hz);
        self
    }

    pub fn coupling_hz(&self) -> Option<&[Vec<f64>]> {
        self.coupling_hz.as_deref()
    }

    pub fn anomalies_hz(&self) -> &BTreeMap<TransitionKey, f64> {
        &self.anomalies_hz
    }

    pub fn anomaly_hz(&self, key: &TransitionKey) -> f64 {
        self.anomalies_hz.get(key).copied().unwrap_or(0.0)
    }

    pub fn is_linear(&self) -> bool {
        self.coupling_hz.is_none() && self.anomalies_hz.values().all(|&e| e == 0.0)
    }
}

/// Instantaneous level shifts Σⱼ G_kj ρ_jj in Hz.
pub fn nonlinear_shift(model: &NonlinearModel, rho: &DensityMatrix) -> Result<Vec<f64>, DynamicsError> {
    let n = rho.dim();
    match &model.coupling_hz {
        None => Ok(vec![0.0; n]),
        Some(g) if g.len() != n => Err(DynamicsError::DimensionMismatch { expected: g.len(), found: n }),
        Some(g) => {
            let pops = rho.populations();
            Ok(g.iter().map(|row| row.iter().zip(&pops).map(|(gk, p)| gk * p).sum()).collect())
        }
    }
}

/// Right-hand side of the master equation for a fixed level subset.
#[derive(Clone, Debug)]
pub struct EvolutionGenerator {
    labels: Vec<String>,
    energies_cm1: Vec<f64>,
    /// Table transitions inside the subset as (lower index, upper index, key).
    links: Vec<(usize, usize, TransitionKey)>,
    decay: Vec<DecayChannel>,
    nonlinear: NonlinearModel,
    /// Row-major G in Hz, or empty when absent.
    coupling: Vec<f64>,
    drives: Vec<DriveTerm>,
    frame: Vec<f64>,
}

/// Assembles the generator for the levels `subset` of `table`.
///
/// Drive indices refer to positions in `subset`.
pub fn build_generator(
    table: &LevelTable,
    subset: &[&str],
    drives: Vec<DriveTerm>,
    nonlinear: NonlinearModel,
    decay: &DecaySpec,
) -> Result<EvolutionGenerator, DynamicsError> {
    let n = subset.len();
    if n == 0 {
        return Err(DynamicsError::InvalidModel("empty level subset".into()));
    }
    let mut levels = Vec::with_capacity(n);
    for (i, label) in subset.iter().enumerate() {
        if subset[..i].contains(label) {
            return Err(DynamicsError::InvalidModel(format!("level `{label}` listed twice")));
        }
        levels.push(table.level(label).ok_or_else(|| DynamicsError::UnknownLevel(label.to_string()))?);
    }
    let labels: Vec<String> = subset.iter().map(|s| s.to_string()).collect();
    let energies_cm1: Vec<f64> = levels.iter().map(|l| l.energy_cm1).collect();

    let mut links = Vec::new();
    for t in table.transitions() {
        let lower = labels.iter().position(|l| *l == t.lower);
        let upper = labels.iter().position(|l| *l == t.upper);
        if let (Some(lo), Some(up)) = (lower, upper) {
            links.push((lo, up, t.key()));
        }
    }

    let lowest = (0..n)
        .min_by(|&a, &b| energies_cm1[a].total_cmp(&energies_cm1[b]))
        .expect("non-empty subset");
    let mut channels = Vec::new();
    let branches: &[Branch] = match decay {
        DecaySpec::Off => &[],
        DecaySpec::FromLifetimes => &[],
        DecaySpec::Branching(b) => b,
    };
    if *decay != DecaySpec::Off {
        for up in (0..n).filter(|&k| k != lowest) {
            let tau = levels[up]
                .lifetime_s
                .ok_or_else(|| DynamicsError::MissingLifetime(labels[up].clone()))?;
            let total = 1.0 / tau;
            let own: Vec<&Branch> = branches.iter().filter(|b| b.upper == labels[up]).collect();
            if own.is_empty() {
                channels.push(DecayChannel { upper: up, lower: lowest, rate: total });
                continue;
            }
            let sum: f64 = own.iter().map(|b| b.fraction).sum();
            if (sum - 1.0).abs() > 1e-9 || own.iter().any(|b| !(b.fraction > 0.0)) {
                return Err(DynamicsError::InvalidModel(format!(
                    "branching fractions of `{}` must be positive and sum to 1",
                    labels[up]
                )));
            }
            for b in own {
                let lo = labels
                    .iter()
                    .position(|l| *l == b.lower)
                    .ok_or_else(|| DynamicsError::UnknownLevel(b.lower.clone()))?;
                if energies_cm1[lo] >= energies_cm1[up] {
                    return Err(DynamicsError::InvalidModel(format!(
                        "branch `{}` → `{}` does not go downward",
                        b.upper, b.lower
                    )));
                }
                channels.push(DecayChannel { upper: up, lower: lo, rate: total * b.fraction });
            }
        }
        if let Some(b) = branches.iter().find(|b| !labels.contains(&b.upper)) {
            return Err(DynamicsError::UnknownLevel(b.upper.clone()));
        }
    }

    let coupling = match nonlinear.coupling_hz() {
        None => Vec::new(),
        Some(g) if g.len() != n => {
            return Err(DynamicsError::DimensionMismatch { expected: n, found: g.len() })
        }
        Some(g) => g.iter().flatten().copied().collect(),
    };

    let base = EvolutionGenerator {
        labels,
        energies_cm1,
        links,
        decay: channels,
        nonlinear,
        coupling,
        drives: Vec::new(),
        frame: vec![0.0; n],
    };
    base.with_drives(drives)
}

impl EvolutionGenerator {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Table energy of subset level `index`, cm⁻¹.
    pub fn energy_cm1(&self, index: usize) -> f64 {
        self.energies_cm1[index]
    }

    pub fn decay_channels(&self) -> &[DecayChannel] {
        &self.decay
    }

    pub fn drives(&self) -> &[DriveTerm] {
        &self.drives
    }

    pub fn nonlinear(&self) -> &NonlinearModel {
        &self.nonlinear
    }

    /// Diagonal rotating-frame terms h_k in rad/s (without the nonlinear part).
    pub fn frame(&self) -> &[f64] {
        &self.frame
    }

    /// Table key of the transition joining subset levels `lower` and `upper`.
    pub fn link(&self, lower: usize, upper: usize) -> Option<&TransitionKey> {
        self.links
            .iter()
            .find(|(lo, up, _)| *lo == lower && *up == upper)
            .map(|(_, _, k)| k)
    }

    /// Subset indices (lower, upper) of a table transition.
    pub fn endpoints(&self, key: &TransitionKey) -> Option<(usize, usize)> {
        self.links.iter().find(|(_, _, k)| k == key).map(|&(lo, up, _)| (lo, up))
    }

    /// A copy of this generator with `drives` replacing the current drives.
    pub fn with_drives(&self, drives: Vec<DriveTerm>) -> Result<EvolutionGenerator, DynamicsError> {
        let n = self.dim();
        let invalid = |msg: String| Err(DynamicsError::InvalidDrive(msg));
        for d in &drives {
            if d.lower >= n || d.upper >= n {
                return invalid(format!("drive indices ({}, {}) outside {n}-level subset", d.lower, d.upper));
            }
            if self.link(d.lower, d.upper).is_none() {
                return Err(DynamicsError::NoTransition {
                    lower: self.labels[d.lower].clone(),
                    upper: self.labels[d.upper].clone(),
                });
            }
            if !(d.rabi_rad_s >= 0.0) || !d.rabi_rad_s.is_finite() {
                return invalid(format!("Rabi frequency {} must be ≥ 0", d.rabi_rad_s));
            }
            if !d.detuning_rad_s.is_finite() || !d.phase_rad.is_finite() {
                return invalid("detuning and phase must be finite".into());
            }
            if !(d.start_s < d.end_s) {
                return invalid(format!("window [{}, {}) is empty", d.start_s, d.end_s));
            }
        }
        // Pulses on one transition share its frame and may not overlap.
        for (i, a) in drives.iter().enumerate() {
            for b in &drives[i + 1..] {
                if (a.lower, a.upper) == (b.lower, b.upper) {
                    if a.detuning_rad_s != b.detuning_rad_s {
                        return invalid("drives on one transition must share a detuning".into());
                    }
                    if a.start_s < b.end_s && b.start_s < a.end_s {
                        return invalid("drives on one transition overlap in time".into());
                    }
                }
            }
        }

        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        for d in &drives {
            if !edges.iter().any(|&(lo, up, _)| (lo, up) == (d.lower, d.upper)) {
                let key = self.link(d.lower, d.upper).expect("checked above");
                let split = -d.detuning_rad_s + TAU * self.nonlinear.anomaly_hz(key);
                edges.push((d.lower, d.upper, split));
            }
        }
        let mut frame: Vec<Option<f64>> = vec![None; n];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.energies_cm1[a].total_cmp(&self.energies_cm1[b]));
        for root in order {
            if frame[root].is_some() {
                continue;
            }
            frame[root] = Some(0.0);
            let mut stack = vec![root];
            while let Some(k) = stack.pop() {
                let hk = frame[k].expect("assigned before push");
                for &(lo, up, split) in &edges {
                    let (other, value) = if lo == k {
                        (up, hk + split)
                    } else if up == k {
                        (lo, hk - split)
                    } else {
                        continue;
                    };
                    match frame[other] {
                        None => {
                            frame[other] = Some(value);
                            stack.push(other);
                        }
                        Some(existing) if (existing - value).abs() > 1e-9 * (1.0 + value.abs()) => {
                            return Err(DynamicsError::DriveLoop);
                        }
                        Some(_) => {}
                    }
                }
            }
        }
        // A closed loop of drives is rejected even when its detunings happen
        // to be consistent: the frame would not be unique.
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(lo, up, _) in &edges {
            let (a, b) = (find(&mut parent, lo), find(&mut parent, up));
            if a == b {
                return Err(DynamicsError::DriveLoop);
            }
            parent[a] = b;
        }

        Ok(EvolutionGenerator {
            drives,
            frame: frame.into_iter().map(|h| h.unwrap_or(0.0)).collect(),
            ..self.clone()
        })
    }

    /// Indices of drives active at time `t`.
    pub(crate) fn active_drives(&self, t: f64) -> Vec<usize> {
        (0..self.drives.len()).filter(|&i| self.drives[i].active_at(t)).collect()
    }

    /// Window edges of all drives.
    pub(crate) fn window_edges(&self) -> Vec<f64> {
        self.drives
            .iter()
            .flat_map(|d| [d.start_s, d.end_s])
            .filter(|t| t.is_finite())
            .collect()
    }

    /// Diagonal Hamiltonian terms (rad/s) including the nonlinear shift at ρ.
    fn diagonal(&self, rho: &[Complex64], out: &mut [f64]) {
        let n = self.dim();
        out.copy_from_slice(&self.frame);
        if !self.coupling.is_empty() {
            for (k, d) in out.iter_mut().enumerate() {
                let shift: f64 = (0..n).map(|j| self.coupling[k * n + j] * rho[j * n + j].re).sum();
                *d += TAU * shift;
            }
        }
    }

    /// Bound on the generator rate at ρ: ∞-norm of H/ħ plus the largest
    /// total decay rate out of one level.
    pub(crate) fn rate_bound(&self, rho: &[Complex64], active: &[usize]) -> f64 {
        let n = self.dim();
        let mut diag = vec![0.0; n];
        self.diagonal(rho, &mut diag);
        let mut rows: Vec<f64> = diag.iter().map(|d| d.abs()).collect();
        for &i in active {
            let d = &self.drives[i];
            rows[d.lower] += 0.5 * d.rabi_rad_s;
            rows[d.upper] += 0.5 * d.rabi_rad_s;
        }
        let mut out_rates = vec![0.0; n];
        for c in &self.decay {
            out_rates[c.upper] += c.rate;
        }
        let h = rows.into_iter().fold(0.0, f64::max);
        let g = out_rates.into_iter().fold(0.0, f64::max);
        h + g
    }

    /// dρ/dt written into `out`. `scratch` must hold `dim()` values.
    pub(crate) fn derivative(&self, rho: &[Complex64], active: &[usize], scratch: &mut [f64], out: &mut [Complex64]) {
        let n = self.dim();
        let minus_i = Complex64::new(0.0, -1.0);
        self.diagonal(rho, scratch);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = minus_i * (scratch[i] - scratch[j]) * rho[i * n + j];
            }
        }
        for &a in active {
            let d = &self.drives[a];
            let (u, l) = (d.upper, d.lower);
            let c = d.coupling();
            let cc = c.conj();
            // −i(Hρ − ρH) for H_ul = c, H_lu = c*.
            for j in 0..n {
                out[u * n + j] += minus_i * c * rho[l * n + j];
                out[l * n + j] += minus_i * cc * rho[u * n + j];
            }
            for i in 0..n {
                out[i * n + l] -= minus_i * rho[i * n + u] * c;
                out[i * n + u] -= minus_i * rho[i * n + l] * cc;
            }
        }
        for ch in &self.decay {
            let (u, l, g) = (ch.upper, ch.lower, ch.rate);
            out[l * n + l] += g * rho[u * n + u];
            for j in 0..n {
                out[u * n + j] -= 0.5 * g * rho[u * n + j];
                out[j * n + u] -= 0.5 * g * rho[j * n + u];
            }
        }
    }
}
