//! Shared fixtures for the benchmarks.

use sbdimer_core::{solve, BasisSpec, EigenSystem, ModelParams};

/// Strongly coupled asymmetric model used throughout the benchmarks.
pub fn strong_coupling() -> ModelParams {
    ModelParams::new(20.0, 0.1, 10.0).expect("valid parameters")
}

pub fn eigensystem(n_osc: usize, keep: usize) -> EigenSystem {
    solve(&strong_coupling(), &BasisSpec::new(n_osc, keep).expect("valid basis")).expect("diagonalization")
}
