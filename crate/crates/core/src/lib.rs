//! Convergence of Gaussian conditional covariances along sequences of
//! covariance matrices with a singular limit.
//!
//! The crate provides the dense linear algebra behind Schur complements with
//! pseudoinverses ([`matrix`]), the subset-sum determinant functional that
//! governs the leading order of `det(UBVᵀ + G/m)` ([`asymptotics`]), an
//! executable convergence checker ([`convergence`]), a Lyapunov solver
//! ([`lyapunov`]) and the trek constructions that produce counterexamples to
//! conditional independence in Lyapunov models ([`trek`]).

pub mod asymptotics;
pub mod cli;
pub mod convergence;
pub mod error;
mod extended;
pub mod lyapunov;
pub mod matrix;
pub mod trek;

pub use error::{Error, Result};
pub use matrix::{IndexSet, Matrix, RankDecomposition, SchurInverse};
