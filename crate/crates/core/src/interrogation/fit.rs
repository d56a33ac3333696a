//! Weighted Levenberg–Marquardt fit of a Ramsey fringe.
//!
//! Model: `P(δ) = B + (C/2)·cos(2π(δ − δ₀)·T) [+ A·(δ − δ₀)]` with the
//! effective dark time T fitted alongside the centre. Finite-atom curves are
//! weighted by the binomial variance of the current model (iteratively
//! reweighted); noiseless curves are fitted unweighted.
//!
//! The symmetric model repeats every fringe period, so every bright fringe
//! fits equally well. Its reported centre is the fringe closest to the
//! middle of the scan, which gives a capture range of half a period.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FringeCurve, InterrogationError};

const MAX_ITERATIONS: usize = 200;
const REWEIGHT_PASSES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LineshapeModel {
    #[default]
    Symmetric,
    /// Adds a linear slope A·(δ − δ₀) for asymmetric lines.
    Asymmetric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub center_hz: f64,
    pub center_sigma_hz: f64,
    pub contrast: f64,
    pub offset: f64,
    /// Slope A in probability per Hz; zero for the symmetric model.
    pub asymmetry: f64,
    /// Fitted fringe period 1/T in Hz.
    pub period_hz: f64,
    /// Weighted residual norm √χ².
    pub residual_norm: f64,
    pub reduced_chi2: f64,
    pub iterations: usize,
}

// Parameter order: B, C, δ₀, T, A.
const B: usize = 0;
const C: usize = 1;
const CENTER: usize = 2;
const DARK: usize = 3;
const SLOPE: usize = 4;

fn model(theta: &[f64], detuning: f64) -> f64 {
    let x = detuning - theta[CENTER];
    let slope = theta.get(SLOPE).copied().unwrap_or(0.0);
    theta[B] + 0.5 * theta[C] * (TAU * x * theta[DARK]).cos() + slope * x
}

fn jacobian_row(theta: &[f64], detuning: f64, row: &mut [f64]) {
    let x = detuning - theta[CENTER];
    let phase = TAU * x * theta[DARK];
    let (s, c) = phase.sin_cos();
    let slope = theta.get(SLOPE).copied().unwrap_or(0.0);
    row[B] = 1.0;
    row[C] = 0.5 * c;
    row[CENTER] = 0.5 * theta[C] * s * TAU * theta[DARK] - slope;
    row[DARK] = -0.5 * theta[C] * s * TAU * x;
    if row.len() > SLOPE {
        row[SLOPE] = x;
    }
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    w: Vec<f64>,
}

impl Problem<'_> {
    fn chi2(&self, theta: &[f64]) -> f64 {
        self.x
            .iter()
            .zip(self.y)
            .zip(&self.w)
            .map(|((&x, &y), &w)| w * (y - model(theta, x)).powi(2))
            .sum()
    }

    /// Normal matrix JᵀWJ and gradient JᵀW r at θ.
    fn normal_equations(&self, theta: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let p = theta.len();
        let mut a = DMatrix::zeros(p, p);
        let mut g = DVector::zeros(p);
        let mut row = vec![0.0; p];
        for ((&x, &y), &w) in self.x.iter().zip(self.y).zip(&self.w) {
            jacobian_row(theta, x, &mut row);
            let r = y - model(theta, x);
            for i in 0..p {
                g[i] += w * row[i] * r;
                for j in 0..p {
                    a[(i, j)] += w * row[i] * row[j];
                }
            }
        }
        (a, g)
    }

    /// Damped Gauss–Newton iterations from θ. Returns iterations used.
    fn minimize(&self, theta: &mut [f64]) -> Result<usize, InterrogationError> {
        let mut lambda = 1e-3;
        let mut chi2 = self.chi2(theta);
        for iteration in 1..=MAX_ITERATIONS {
            let (a, g) = self.normal_equations(theta);
            let mut damped = a.clone();
            for i in 0..theta.len() {
                damped[(i, i)] += lambda * a[(i, i)].max(1e-300);
            }
            let delta = damped
                .cholesky()
                .ok_or(InterrogationError::DegenerateDesign)?
                .solve(&g);
            let trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
            let trial_chi2 = self.chi2(&trial);
            if trial_chi2 <= chi2 {
                let small = delta
                    .iter()
                    .zip(theta.iter())
                    .all(|(d, t)| d.abs() <= 1e-12 * (t.abs() + 1e-6));
                theta.copy_from_slice(&trial);
                let improvement = chi2 - trial_chi2;
                chi2 = trial_chi2;
                lambda = (lambda * 0.1).max(1e-12);
                if small || improvement <= 1e-15 * chi2.max(1e-300) {
                    return Ok(iteration);
                }
            } else {
                lambda *= 10.0;
                if lambda > 1e12 {
                    // No descent direction left: θ sits at the numerical minimum.
                    return Ok(iteration);
                }
            }
        }
        Err(InterrogationError::NonConvergence { iterations: MAX_ITERATIONS })
    }
}

/// Fits the fringe centre, contrast, offset, period and (optionally) slope.
pub fn fit_center(curve: &FringeCurve, lineshape: LineshapeModel) -> Result<FitResult, InterrogationError> {
    let n_params = match lineshape {
        LineshapeModel::Symmetric => 4,
        LineshapeModel::Asymmetric => 5,
    };
    let n = curve.points.len();
    if n < 5 || n <= n_params {
        return Err(InterrogationError::InsufficientData(format!(
            "{n} points cannot constrain {n_params} parameters"
        )));
    }
    let dark = curve.dark_time_s;
    if !(dark > 0.0) {
        return Err(InterrogationError::InvalidProtocol("curve dark time must be positive".into()));
    }
    let x = curve.detunings();
    let y = curve.probabilities();
    let span = x[n - 1] - x[0];
    if span < 0.5 / dark {
        return Err(InterrogationError::InsufficientData(format!(
            "scan span {span} Hz is less than half a fringe ({} Hz)",
            0.5 / dark
        )));
    }

    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("n ≥ 5");
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    if ymax - ymin <= 1e-12 {
        return Err(InterrogationError::DegenerateDesign);
    }
    let mut theta = vec![0.5 * (ymax + ymin), ymax - ymin, x[imax], dark];
    if lineshape == LineshapeModel::Asymmetric {
        theta.push(0.0);
    }

    let atoms: Vec<Option<u32>> = curve.points.iter().map(|p| p.n_atoms).collect();
    let noiseless = atoms.iter().all(Option::is_none);
    let weights = |theta: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(&atoms)
            .map(|(&d, n)| match n {
                None => 1.0,
                Some(n) => {
                    let n = *n as f64;
                    let p = model(theta, d).clamp(0.0, 1.0);
                    n / (p * (1.0 - p)).max(1.0 / n)
                }
            })
            .collect()
    };

    let mut problem = Problem { x: &x, y: &y, w: weights(&theta) };
    let mut iterations = problem.minimize(&mut theta)?;
    if !noiseless {
        for _ in 1..REWEIGHT_PASSES {
            problem.w = weights(&theta);
            iterations += problem.minimize(&mut theta)?;
        }
    }

    if theta[C] < 0.0 {
        // Same curve with the centre on the other fringe extremum.
        theta[C] = -theta[C];
        let half = 0.5 / theta[DARK];
        theta[CENTER] += if theta[CENTER] < x[imax] { half } else { -half };
    }
    if lineshape == LineshapeModel::Symmetric {
        let period = 1.0 / theta[DARK];
        let mid = 0.5 * (x[0] + x[n - 1]);
        theta[CENTER] -= period * ((theta[CENTER] - mid) / period).round();
    }

    let (a, _) = problem.normal_equations(&theta);
    let covariance = a.try_inverse().ok_or(InterrogationError::DegenerateDesign)?;
    let chi2 = problem.chi2(&theta);
    let dof = (n - n_params) as f64;
    let reduced_chi2 = chi2 / dof;
    let scale = if noiseless { reduced_chi2 } else { reduced_chi2.max(1.0) };
    let variance = covariance[(CENTER, CENTER)] * scale;
    if !(variance >= 0.0) {
        return Err(InterrogationError::DegenerateDesign);
    }

    Ok(FitResult {
        center_hz: theta[CENTER],
        center_sigma_hz: variance.sqrt(),
        contrast: theta[C],
        offset: theta[B],
        asymmetry: theta.get(SLOPE).copied().unwrap_or(0.0),
        period_hz: 1.0 / theta[DARK],
        residual_norm: chi2.sqrt(),
        reduced_chi2,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interrogation::ramsey::{detuning_grid, AtomCount, FringeCurve};

    fn analytic_curve(center: f64, dark: f64, contrast: f64, slope: f64, n: usize) -> FringeCurve {
        let x = detuning_grid(0.0, 0.75 / dark, n);
        let p: Vec<f64> = x
            .iter()
            .map(|d| 0.5 + 0.5 * contrast * (TAU * (d - center) * dark).cos() + slope * (d - center))
            .collect();
        FringeCurve::sample(dark, &x, &p, AtomCount::Infinite, 0).unwrap()
    }

    #[test]
    fn recovers_exact_model() {
        let fit = fit_center(&analytic_curve(0.0, 0.5, 0.9, 0.0, 31), LineshapeModel::Symmetric).unwrap();
        assert!(fit.center_hz.abs() < 1e-9 * 2.0);
        assert!((fit.contrast - 0.9).abs() < 1e-9);
        assert!((fit.period_hz - 2.0).abs() < 1e-9);
        assert!((fit.offset - 0.5).abs() < 1e-9);
    }

    #[test]
    fn shifted_curve_moves_center() {
        let fit = fit_center(&analytic_curve(0.3, 0.5, 0.95, 0.0, 31), LineshapeModel::Symmetric).unwrap();
        assert!((fit.center_hz - 0.3).abs() < 1e-9, "{}", fit.center_hz);
    }

    #[test]
    fn symmetric_fit_reports_the_fringe_nearest_the_scan_middle() {
        // Fringes at −0.6 and +1.4 Hz; the one at +1.4 is the tallest sample.
        let dark = 0.5;
        let x = detuning_grid(0.0, 1.5, 31);
        let p: Vec<f64> = x
            .iter()
            .map(|d| 0.5 + 0.45 * (TAU * (d + 0.6) * dark).cos() * (1.0 - 0.05 * (d - 1.4).powi(2)))
            .collect();
        let curve = FringeCurve::sample(dark, &x, &p, AtomCount::Infinite, 0).unwrap();
        let fit = fit_center(&curve, LineshapeModel::Symmetric).unwrap();
        assert!((fit.center_hz + 0.6).abs() < 0.1, "{}", fit.center_hz);
    }

    #[test]
    fn asymmetric_model_absorbs_slope() {
        let curve = analytic_curve(0.1, 0.5, 0.9, 0.02, 41);
        let asym = fit_center(&curve, LineshapeModel::Asymmetric).unwrap();
        assert!((asym.center_hz - 0.1).abs() < 1e-8, "{}", asym.center_hz);
        assert!((asym.asymmetry - 0.02).abs() < 1e-8);
        let sym = fit_center(&curve, LineshapeModel::Symmetric).unwrap();
        assert!((sym.center_hz - 0.1).abs() > 1e-4, "slope should pull the symmetric fit");
    }

    #[test]
    fn rejects_too_few_points_or_narrow_span() {
        let short = analytic_curve(0.0, 0.5, 0.9, 0.0, 4);
        assert!(matches!(fit_center(&short, LineshapeModel::Symmetric), Err(InterrogationError::InsufficientData(_))));
        let x = detuning_grid(0.0, 0.1, 11);
        let p: Vec<f64> = x.iter().map(|d| 0.5 + 0.5 * (TAU * d * 0.5).cos()).collect();
        let narrow = FringeCurve::sample(0.5, &x, &p, AtomCount::Infinite, 0).unwrap();
        assert!(fit_center(&narrow, LineshapeModel::Symmetric).is_err());
    }

    #[test]
    fn flat_curve_is_degenerate() {
        let x = detuning_grid(0.0, 2.0, 11);
        let flat = FringeCurve::sample(0.5, &x, &[0.5; 11], AtomCount::Infinite, 0).unwrap();
        assert!(matches!(fit_center(&flat, LineshapeModel::Symmetric), Err(InterrogationError::DegenerateDesign)));
    }
}
