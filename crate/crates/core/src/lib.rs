//! Linear difference equations with multiple delays, transport systems on
//! intervals and damped wave propagation on networks.
//!
//! The library computes the coefficient representation of solutions of
//! `u(t) = Σ A_j(t) u(t - L_j)`, estimates growth rates through generalized
//! joint spectral radii, and applies the machinery to transport and wave
//! networks whose stability is decided by the network topology.

pub mod cli;
pub mod coefficients;
pub mod diffeq;
pub mod error;
pub mod io;
pub mod matrix;
pub mod rational;
pub mod ratlattice;
pub mod scalar;
pub mod signal;
pub mod spectral;
pub mod transport;
pub mod wavenet;

pub use error::{Error, Result};
pub use matrix::Mat;
pub use rational::Q;
pub use scalar::{ExactComplex, Scalar, C64};

/// Central tolerances, overridable per run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub algebraic: f64,
    pub simulation: f64,
    pub spectral: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { algebraic: 1e-12, simulation: 1e-8, spectral: 0.02 }
    }
}
