use std::f64::consts::PI;
use std::path::PathBuf;

use clockclosure_core::dynamics::{build_generator, evolve, step, DecaySpec, DensityMatrix, DriveTerm, NonlinearModel};
use clockclosure_core::spectra::{load_level_table, LevelTable};

fn yb() -> LevelTable {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/levels/yb_i.csv");
    load_level_table(path).unwrap()
}

#[test]
fn driven_decaying_three_level_system_stays_physical() {
    // Ladder 1S0 → 3P0 → 3D1 with both lines driven; 3D1 decays in 329 ns.
    let table = yb();
    let tau = 329e-9;
    let omega = 2.0 * PI / tau;
    let drives = vec![
        DriveTerm::continuous(0, 1, omega, 0.3 * omega),
        DriveTerm::continuous(1, 2, 0.7 * omega, -0.2 * omega),
    ];
    let gen = build_generator(
        &table,
        &["1S0", "3P0", "3D1"],
        drives,
        NonlinearModel::level_decomposable(&[0.0, 1e4, -3e4]).unwrap(),
        &DecaySpec::FromLifetimes,
    )
    .unwrap();
    let dt = tau / 2000.0;
    let mut rho = DensityMatrix::pure(3, 0).unwrap();
    let mut worst_trace: f64 = 0.0;
    let mut worst_herm: f64 = 0.0;
    let mut worst_eig: f64 = 0.0;
    for k in 0..10_000 {
        rho = step(&rho, &gen, k as f64 * dt, dt).unwrap();
        if k % 100 == 99 {
            worst_trace = worst_trace.max((rho.trace().re - 1.0).abs().max(rho.trace().im.abs()));
            worst_herm = worst_herm.max(rho.hermiticity_error());
            worst_eig = worst_eig.min(rho.min_eigenvalue());
        }
    }
    assert!(worst_trace < 1e-10, "trace drift {worst_trace:e}");
    assert!(worst_herm < 1e-12, "hermiticity {worst_herm:e}");
    assert!(worst_eig >= -1e-10, "eigenvalue {worst_eig:e}");
}

#[test]
fn closed_system_keeps_purity() {
    let table = yb();
    let omega = 2.0 * PI * 500.0;
    let gen = build_generator(
        &table,
        &["1S0", "3P0", "J2"],
        vec![DriveTerm::continuous(0, 1, omega, 2.0 * PI * 40.0), DriveTerm::continuous(1, 2, 0.5 * omega, 0.0)],
        NonlinearModel::none(),
        &DecaySpec::Off,
    )
    .unwrap();
    let rho = evolve(&DensityMatrix::pure(3, 0).unwrap(), &gen, 0.01, 1e-6).unwrap();
    assert!((rho.purity() - 1.0).abs() < 1e-9, "{}", rho.purity());
}

/// |P_e(t) − sin²(Ωt/2)| for a resonant two-level Rabi flop in `n` steps.
fn rabi_error(n: usize) -> f64 {
    let table = yb();
    let omega = 2.0 * PI * 1000.0;
    let gen = build_generator(
        &table,
        &["1S0", "3P0"],
        vec![DriveTerm::continuous(0, 1, omega, 0.0)],
        NonlinearModel::none(),
        &DecaySpec::Off,
    )
    .unwrap();
    let t = 3.0 / omega;
    let rho = evolve(&DensityMatrix::pure(2, 0).unwrap(), &gen, t, t / n as f64).unwrap();
    (rho.population(1) - (0.5 * omega * t).sin().powi(2)).abs()
}

#[test]
fn rk4_converges_at_fourth_order() {
    let errors: Vec<f64> = [40, 80, 160, 320].iter().map(|&n| rabi_error(n)).collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio >= 15.0, "error ratio {ratio} from {errors:?}");
    }
}

#[test]
fn intercombination_line_decays_exponentially() {
    let table = yb();
    let tau = 866e-9;
    let gen = build_generator(&table, &["1S0", "3P1"], vec![], NonlinearModel::none(), &DecaySpec::FromLifetimes).unwrap();
    let rho = evolve(&DensityMatrix::pure(2, 1).unwrap(), &gen, tau, tau / 1000.0).unwrap();
    assert!((rho.population(1) - (-1.0f64).exp()).abs() < 1e-5);
    assert!((rho.population(0) - (1.0 - (-1.0f64).exp())).abs() < 1e-5);
}

#[test]
fn nonlinear_shift_leaves_populations_of_a_diagonal_state_alone() {
    let table = yb();
    let g = vec![vec![0.0, 5.0, 1.0], vec![-2.0, 0.0, 3.0], vec![4.0, 0.5, 0.0]];
    let gen = build_generator(
        &table,
        &["1S0", "3P0", "J2"],
        vec![],
        NonlinearModel::none().with_coupling(g).unwrap(),
        &DecaySpec::Off,
    )
    .unwrap();
    let rho = DensityMatrix::from_populations(&[0.2, 0.5, 0.3]).unwrap();
    let out = evolve(&rho, &gen, 1.0, 1e-3).unwrap();
    for k in 0..3 {
        assert!((out.population(k) - rho.population(k)).abs() < 1e-14);
    }
}
