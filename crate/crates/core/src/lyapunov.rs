//! Stability tests and a dense solver for the continuous Lyapunov equation
//! `M Σ + Σ Mᵀ + 2 I = 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Eigenvalue real parts must lie below `−DEFAULT_STAB_TOL`.
pub const DEFAULT_STAB_TOL: f64 = 1e-9;

/// Largest real part among the eigenvalues of `m`.
pub fn spectral_abscissa(m: &Matrix) -> Result<f64> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "stability needs a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let eigenvalues = m.as_nalgebra().complex_eigenvalues();
    Ok(eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// `(stable, spectral abscissa)` with the default tolerance.
pub fn is_stable(m: &Matrix) -> Result<(bool, f64)> {
    is_stable_with_tol(m, DEFAULT_STAB_TOL)
}

pub fn is_stable_with_tol(m: &Matrix, stab_tol: f64) -> Result<(bool, f64)> {
    let abscissa = spectral_abscissa(m)?;
    Ok((abscissa < -stab_tol, abscissa))
}

/// A square matrix whose eigenvalues all have negative real part.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StableMatrix {
    m: Matrix,
    spectral_abscissa: f64,
}

impl StableMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        Self::with_tol(m, DEFAULT_STAB_TOL)
    }

    pub fn with_tol(m: Matrix, stab_tol: f64) -> Result<Self> {
        let (stable, abscissa) = is_stable_with_tol(&m, stab_tol)?;
        if !stable {
            return Err(Error::Unstable { abscissa });
        }
        Ok(StableMatrix { m, spectral_abscissa: abscissa })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn spectral_abscissa(&self) -> f64 {
        self.spectral_abscissa
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }
}

/// Solves `M Σ + Σ Mᵀ + 2 I = 0` through the `p²×p²` system
/// `(I ⊗ M + M ⊗ I) vec(Σ) = −2 vec(I)` with column-major `vec`.
pub fn solve_lyapunov(m: &StableMatrix) -> Result<Matrix> {
    let p = m.dim();
    let a = m.matrix().as_nalgebra();
    let eye = nalgebra::DMatrix::<f64>::identity(p, p);
    let kron = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = nalgebra::DVector::from_fn(p * p, |idx, _| if idx % p == idx / p { -2.0 } else { 0.0 });
    let solution = kron
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("Kronecker system is singular".into()))?;
    let sigma = Matrix::from(nalgebra::DMatrix::from_column_slice(p, p, solution.as_slice()));
    if !sigma.is_finite() {
        return Err(Error::Solver("Kronecker solve produced non-finite entries".into()));
    }
    Ok(sigma)
}

/// `‖M Σ + Σ Mᵀ + 2 I‖_max`.
pub fn lyapunov_residual(m: &Matrix, sigma: &Matrix) -> Result<f64> {
    if m.shape() != sigma.shape() || !m.is_square() {
        return Err(Error::Dimension("M and Σ must be square of equal size".into()));
    }
    let ms = m * sigma;
    let total = &(&ms + &ms.transpose()) + &Matrix::identity(m.nrows()).scale(2.0);
    Ok(total.max_abs())
}

/// `A − (‖A‖₂ + 1) I` for `A` with entries uniform in `[−1, 1]`; every
/// eigenvalue then has real part at most `−1`.
pub fn random_stable(p: usize, seed: u64) -> Result<StableMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Matrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..=1.0));
    let norm = a.singular_values().first().copied().unwrap_or(0.0);
    StableMatrix::new(&a - &Matrix::identity(p).scale(norm + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m4() -> Matrix {
        Matrix::from_rows(&[
            [-1.0, 1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
            [0.0, 1.0, -1.0, 0.0],
            [0.0, 0.0, 1.0, -1.0],
        ])
        .unwrap()
    }

    #[test]
    fn small_trek_matrix_is_stable() {
        let (stable, abscissa) = is_stable(&m4()).unwrap();
        assert!(stable);
        assert!((abscissa + 1.0).abs() < 1e-6);
    }

    #[test]
    fn identity_is_unstable() {
        let (stable, abscissa) = is_stable(&Matrix::identity(3)).unwrap();
        assert!(!stable);
        assert!((abscissa - 1.0).abs() < 1e-12);
        assert!(matches!(
            StableMatrix::new(Matrix::identity(3)),
            Err(Error::Unstable { abscissa }) if (abscissa - 1.0).abs() < 1e-12
        ));
        assert!(is_stable(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn rotation_block_uses_real_parts() {
        let m = Matrix::from_rows(&[[-0.5, 3.0], [-3.0, -0.5]]).unwrap();
        let (stable, abscissa) = is_stable(&m).unwrap();
        assert!(stable);
        assert!((abscissa + 0.5).abs() < 1e-12);
    }

    #[test]
    fn reproduces_sigma4() {
        let sigma = solve_lyapunov(&StableMatrix::new(m4()).unwrap()).unwrap();
        let expected = Matrix::from_rows(&[
            [1.5, 0.5, 0.5, 0.375],
            [0.5, 1.0, 0.5, 0.25],
            [0.5, 0.5, 1.5, 0.875],
            [0.375, 0.25, 0.875, 1.875],
        ])
        .unwrap();
        assert!((&sigma - &expected).max_abs() < 1e-12, "{sigma}");
        assert!(lyapunov_residual(&m4(), &sigma).unwrap() < 1e-12);
    }

    #[test]
    fn negative_identity_gives_identity() {
        let sigma = solve_lyapunov(&StableMatrix::new(Matrix::identity(3).scale(-1.0)).unwrap()).unwrap();
        assert!((&sigma - &Matrix::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn random_stable_solutions_are_symmetric_positive_definite() {
        for seed in 0..30 {
            let p = 1 + (seed as usize % 10);
            let m = random_stable(p, seed).unwrap();
            let sigma = solve_lyapunov(&m).unwrap();
            assert!(lyapunov_residual(m.matrix(), &sigma).unwrap() <= 1e-10 * p as f64);
            assert!(sigma.asymmetry().unwrap() <= 1e-10 * (1.0 + sigma.max_abs()));
            let min_eig = sigma.as_nalgebra().clone().symmetric_eigen().eigenvalues.min();
            assert!(min_eig > 0.0, "seed {seed}");
        }
    }
}
