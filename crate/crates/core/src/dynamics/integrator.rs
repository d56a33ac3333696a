//! Classical RK4 for the master equation.
//!
//! The nonlinear term is re-evaluated from each stage's ρ, and the result of
//! every step is re-Hermitized. Drive activity is fixed per step from the
//! step midpoint; `evolve` aligns step boundaries with drive window edges.

use num_complex::Complex64;

use super::{DensityMatrix, DynamicsError, EvolutionGenerator};

/// dt·rate must stay below this.
pub const STABILITY_LIMIT: f64 = 0.1;

struct Workspace {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    stage: Vec<Complex64>,
    diag: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Workspace {
            k1: vec![z; n * n],
            k2: vec![z; n * n],
            k3: vec![z; n * n],
            k4: vec![z; n * n],
            stage: vec![z; n * n],
            diag: vec![0.0; n],
        }
    }
}

fn check_dims(rho: &DensityMatrix, gen: &EvolutionGenerator) -> Result<(), DynamicsError> {
    if rho.dim() != gen.dim() {
        return Err(DynamicsError::DimensionMismatch { expected: gen.dim(), found: rho.dim() });
    }
    Ok(())
}

fn rk4_in_place(
    rho: &mut DensityMatrix,
    gen: &EvolutionGenerator,
    active: &[usize],
    dt: f64,
    ws: &mut Workspace,
) -> Result<(), DynamicsError> {
    let rate = gen.rate_bound(rho.as_slice(), active);
    if dt * rate >= STABILITY_LIMIT {
        return Err(DynamicsError::StepTooLarge { dt, rate });
    }
    let y = rho.as_mut_slice();
    gen.derivative(y, active, &mut ws.diag, &mut ws.k1);
    for (s, (y, k)) in ws.stage.iter_mut().zip(y.iter().zip(&ws.k1)) {
        *s = y + k * (0.5 * dt);
    }
    gen.derivative(&ws.stage, active, &mut ws.diag, &mut ws.k2);
    for (s, (y, k)) in ws.stage.iter_mut().zip(y.iter().zip(&ws.k2)) {
        *s = y + k * (0.5 * dt);
    }
    gen.derivative(&ws.stage, active, &mut ws.diag, &mut ws.k3);
    for (s, (y, k)) in ws.stage.iter_mut().zip(y.iter().zip(&ws.k3)) {
        *s = y + k * dt;
    }
    gen.derivative(&ws.stage, active, &mut ws.diag, &mut ws.k4);
    let w = dt / 6.0;
    for (i, y) in y.iter_mut().enumerate() {
        *y += (ws.k1[i] + (ws.k2[i] + ws.k3[i]) * 2.0 + ws.k4[i]) * w;
    }
    rho.hermitize();
    Ok(())
}

/// One RK4 step of length `dt` starting at time `t`.
pub fn step(rho: &DensityMatrix, gen: &EvolutionGenerator, t: f64, dt: f64) -> Result<DensityMatrix, DynamicsError> {
    check_dims(rho, gen)?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(DynamicsError::NonPositiveStep(dt));
    }
    let mut out = rho.clone();
    let mut ws = Workspace::new(rho.dim());
    rk4_in_place(&mut out, gen, &gen.active_drives(t + 0.5 * dt), dt, &mut ws)?;
    Ok(out)
}

/// Evolves from t = 0 for `duration` seconds with steps of at most `dt`.
pub fn evolve(rho: &DensityMatrix, gen: &EvolutionGenerator, duration: f64, dt: f64) -> Result<DensityMatrix, DynamicsError> {
    evolve_from(rho, gen, 0.0, duration, dt)
}

/// Evolves over `[t0, t0 + duration]`. The interval is cut at every drive
/// window edge and each piece is split into equal steps no longer than `dt`.
pub fn evolve_from(
    rho: &DensityMatrix,
    gen: &EvolutionGenerator,
    t0: f64,
    duration: f64,
    dt: f64,
) -> Result<DensityMatrix, DynamicsError> {
    check_dims(rho, gen)?;
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(DynamicsError::InvalidModel(format!("duration {duration} must be ≥ 0")));
    }
    if duration == 0.0 {
        return Ok(rho.clone());
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(DynamicsError::NonPositiveStep(dt));
    }
    let t1 = t0 + duration;
    let mut cuts = vec![t0, t1];
    cuts.extend(gen.window_edges().into_iter().filter(|&e| e > t0 && e < t1));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut out = rho.clone();
    let mut ws = Workspace::new(rho.dim());
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b - a;
        if len <= 0.0 {
            continue;
        }
        let steps = ((len / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = len / steps as f64;
        let active = gen.active_drives(a + 0.5 * len);
        for _ in 0..steps {
            rk4_in_place(&mut out, gen, &active, h, &mut ws)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_generator, DecaySpec, DriveTerm, NonlinearModel};
    use crate::spectra::{AngularMomentum, Level, LevelTable, Parity, Transition, TransitionKind};
    use std::f64::consts::PI;

    pub(crate) fn table(lifetimes: [Option<f64>; 3]) -> LevelTable {
        let level = |label: &str, e: f64, tau: Option<f64>| Level {
            label: label.into(),
            configuration: String::new(),
            term: String::new(),
            j: AngularMomentum::from_twice(0),
            parity: Parity::Even,
            energy_cm1: e,
            lifetime_s: tau,
        };
        let tr = |lo: &str, up: &str| Transition {
            lower: lo.into(),
            upper: up.into(),
            kind: TransitionKind::E1,
            measured_hz: None,
            sigma_hz: None,
        };
        LevelTable::new(
            "t",
            vec![level("g", 0.0, lifetimes[0]), level("e", 100.0, lifetimes[1]), level("f", 250.0, lifetimes[2])],
            vec![tr("g", "e"), tr("e", "f"), tr("g", "f")],
        )
        .unwrap()
    }

    #[test]
    fn zero_generator_is_identity() {
        let gen = build_generator(&table([None; 3]), &["g", "e"], vec![], NonlinearModel::none(), &DecaySpec::Off).unwrap();
        let rho = DensityMatrix::from_populations(&[0.3, 0.7]).unwrap();
        assert_eq!(step(&rho, &gen, 0.0, 0.123).unwrap(), rho);
        assert_eq!(evolve(&rho, &gen, 0.0, 1.0).unwrap(), rho);
    }

    #[test]
    fn resonant_pi_pulse_inverts() {
        let omega = 2.0 * PI * 100.0;
        let gen = build_generator(
            &table([None; 3]),
            &["g", "e"],
            vec![DriveTerm::continuous(0, 1, omega, 0.0)],
            NonlinearModel::none(),
            &DecaySpec::Off,
        )
        .unwrap();
        let t_pi = PI / omega;
        let rho = evolve(&DensityMatrix::pure(2, 0).unwrap(), &gen, t_pi, t_pi / 1000.0).unwrap();
        assert!((rho.population(1) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn decay_step_preserves_trace() {
        let tau = 866e-9;
        let gen = build_generator(&table([None, Some(tau), None]), &["g", "e"], vec![], NonlinearModel::none(), &DecaySpec::FromLifetimes)
            .unwrap();
        let rho = step(&DensityMatrix::pure(2, 1).unwrap(), &gen, 0.0, tau / 1000.0).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        assert!((rho.population(1) - (-1e-3f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn oversize_step_is_rejected() {
        let gen = build_generator(
            &table([None; 3]),
            &["g", "e"],
            vec![DriveTerm::continuous(0, 1, 1000.0, 0.0)],
            NonlinearModel::none(),
            &DecaySpec::Off,
        )
        .unwrap();
        assert!(matches!(
            step(&DensityMatrix::pure(2, 0).unwrap(), &gen, 0.0, 1e-3),
            Err(DynamicsError::StepTooLarge { .. })
        ));
        assert!(matches!(
            step(&DensityMatrix::pure(2, 0).unwrap(), &gen, 0.0, 0.0),
            Err(DynamicsError::NonPositiveStep(_))
        ));
    }

    #[test]
    fn windows_switch_drive_on_and_off() {
        let omega = 2.0 * PI * 50.0;
        let t_pi = PI / omega;
        // π pulse during [0.1 t_pi, 1.1 t_pi]; the evolution straddles both edges.
        let drive = DriveTerm::continuous(0, 1, omega, 0.0).window(0.1 * t_pi, 1.1 * t_pi);
        let gen = build_generator(&table([None; 3]), &["g", "e"], vec![drive], NonlinearModel::none(), &DecaySpec::Off).unwrap();
        let rho = evolve(&DensityMatrix::pure(2, 0).unwrap(), &gen, 1.5 * t_pi, t_pi / 300.0).unwrap();
        assert!((rho.population(1) - 1.0).abs() < 1e-8, "{}", rho.population(1));
    }

    #[test]
    fn ramsey_coherence_phase_advances_with_detuning() {
        let omega = 2.0 * PI * 1000.0;
        let t_half = PI / (2.0 * omega);
        let delta = 2.0 * PI * 3.0;
        let free = 0.07;
        let drive = DriveTerm::continuous(0, 1, omega, delta).window(0.0, t_half);
        let gen = build_generator(&table([None; 3]), &["g", "e"], vec![drive], NonlinearModel::none(), &DecaySpec::Off).unwrap();
        let after_pulse = evolve(&DensityMatrix::pure(2, 0).unwrap(), &gen, t_half, t_half / 200.0).unwrap();
        let after_free = evolve_from(&after_pulse, &gen, t_half, free, free / 2000.0).unwrap();
        let phase0 = after_pulse.get(1, 0).arg();
        let phase1 = after_free.get(1, 0).arg();
        let advance = (phase1 - phase0).rem_euclid(2.0 * PI);
        assert!((advance - (delta * free).rem_euclid(2.0 * PI)).abs() < 1e-9, "{advance}");
    }
}
