//! Exact diagonalization of the asymmetric spin-boson dimer, phase-space
//! analysis of its eigenstates and optical absorption bands.

pub mod absorption;
pub mod adiabatic;
pub mod error;
pub mod model;
pub mod phase_analysis;
pub mod spectrum;

pub use absorption::{
    absorption_strength, band_windows, interpolate_band, ratio_curve, spin_direction, spin_ratio, stick_spectrum,
    transition_element, EnergyWindow, Line, OpticalParams, RatioCurve, StickSpectrum,
};
pub use adiabatic::{adiabatic_potentials, classical_orbit, potential_minimum, Branch, Orbit};
pub use error::{Error, Result};
pub use model::{
    build_hamiltonian, hamiltonian_element, reduce_dimer_params, BasisSpec, BasisState, DimerParams, ModelParams,
    Spin, SymmetricBandMatrix,
};
pub use phase_analysis::{
    bloch_projection, bloch_scan, husimi_grid, husimi_value, parity_expectation, HusimiGrid, PhasePoint,
    PhaseWindow, SpinProjection,
};
pub use spectrum::{convergence_check, diagonalize, solve, ConvergenceReport, EigenSystem};
