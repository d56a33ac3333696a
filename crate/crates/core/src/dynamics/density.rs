use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::DynamicsError;

const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-10;

/// An n-level density matrix, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    /// The pure state |k⟩⟨k| of an n-level system.
    pub fn pure(n: usize, k: usize) -> Result<Self, DynamicsError> {
        if k >= n {
            return Err(DynamicsError::DimensionMismatch { expected: n, found: k + 1 });
        }
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        data[k * n + k] = Complex64::new(1.0, 0.0);
        Ok(DensityMatrix { n, data })
    }

    /// A diagonal (incoherent) state with the given populations.
    pub fn from_populations(populations: &[f64]) -> Result<Self, DynamicsError> {
        let n = populations.len();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for (k, &p) in populations.iter().enumerate() {
            data[k * n + k] = Complex64::new(p, 0.0);
        }
        let rho = DensityMatrix { n, data };
        rho.validate()?;
        Ok(rho)
    }

    /// A state from row-major elements, validated against the density-matrix
    /// invariants.
    pub fn from_elements(n: usize, data: Vec<Complex64>) -> Result<Self, DynamicsError> {
        if data.len() != n * n {
            return Err(DynamicsError::DimensionMismatch { expected: n * n, found: data.len() });
        }
        let rho = DensityMatrix { n, data };
        rho.validate()?;
        Ok(rho)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn population(&self, k: usize) -> f64 {
        self.data[k * self.n + k].re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.population(k)).collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|k| self.data[k * self.n + k]).sum()
    }

    /// tr ρ².
    pub fn purity(&self) -> f64 {
        // tr(ρρ) = Σ ρ_ij ρ_ji
        let n = self.n;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.data[i * n + j] * self.data[j * n + i];
            }
        }
        acc.re
    }

    /// Largest |ρ_ij − conj(ρ_ji)|.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let d = self.data[i * n + j] - self.data[j * n + i].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// Replaces ρ by (ρ + ρ†)/2.
    pub fn hermitize(&mut self) {
        let n = self.n;
        for i in 0..n {
            let d = &mut self.data[i * n + i];
            d.im = 0.0;
            for j in (i + 1)..n {
                let avg = (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5;
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
    }

    /// Smallest eigenvalue of the Hermitian part of ρ.
    pub fn min_eigenvalue(&self) -> f64 {
        let mut m = DMatrix::from_row_slice(self.n, self.n, &self.data);
        m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity, unit trace and numerical positivity.
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let h = self.hermiticity_error();
        if h > HERMITICITY_TOL {
            return Err(DynamicsError::InvalidState(format!("not Hermitian (error {h:e})")));
        }
        let tr = self.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(DynamicsError::InvalidState(format!("trace {tr} ≠ 1")));
        }
        let lambda = self.min_eigenvalue();
        if lambda < -POSITIVITY_TOL {
            return Err(DynamicsError::InvalidState(format!("negative eigenvalue {lambda:e}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_state_properties() {
        let rho = DensityMatrix::pure(3, 1).unwrap();
        assert_eq!(rho.populations(), vec![0.0, 1.0, 0.0]);
        assert_eq!(rho.purity(), 1.0);
        assert!(rho.validate().is_ok());
        assert!(DensityMatrix::pure(2, 2).is_err());
    }

    #[test]
    fn rejects_invalid_states() {
        assert!(DensityMatrix::from_populations(&[0.7, 0.7]).is_err());
        assert!(DensityMatrix::from_populations(&[1.2, -0.2]).is_err());
        let c = |re, im| Complex64::new(re, im);
        let non_hermitian = vec![c(0.5, 0.0), c(0.1, 0.1), c(0.1, 0.1), c(0.5, 0.0)];
        assert!(DensityMatrix::from_elements(2, non_hermitian).is_err());
    }

    #[test]
    fn mixed_state_eigenvalues() {
        let c = |re, im| Complex64::new(re, im);
        let rho = DensityMatrix::from_elements(2, vec![c(0.5, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.5, 0.0)]).unwrap();
        assert!(rho.min_eigenvalue().abs() < 1e-14);
        assert!((rho.purity() - 1.0).abs() < 1e-14);
        let mixed = DensityMatrix::from_populations(&[0.25, 0.75]).unwrap();
        assert!((mixed.min_eigenvalue() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn hermitize_symmetrizes() {
        let c = |re, im| Complex64::new(re, im);
        let mut rho = DensityMatrix { n: 2, data: vec![c(0.5, 1e-9), c(0.1, 0.2), c(0.3, 0.0), c(0.5, 0.0)] };
        rho.hermitize();
        assert_eq!(rho.hermiticity_error(), 0.0);
        assert_eq!(rho.get(0, 1), c(0.2, 0.1));
    }
}
