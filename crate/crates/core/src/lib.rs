//! Effective many-body Ising couplings mediated by a nonlinear LC coupler.
//!
//! The pipeline runs circuit values → unitless parameters → truncated
//! oscillator Hamiltonians → reduced two-level qubits ⊗ coupler → spectrum,
//! and in parallel through a fourth-order Schrieffer–Wolff expansion.

pub mod analysis;
pub mod circuit;
pub mod cli;
pub mod fit;
pub mod hamiltonian;
pub mod operator;
pub mod oscillator;
pub mod pauli;
pub mod scalar;
pub mod spectrum;
pub mod swt;

pub use scalar::Scalar;

pub type CircuitParams = circuit::CircuitParams<f64>;
pub type UnitlessParams = circuit::UnitlessParams<f64>;
pub type PhysicalConstants = circuit::PhysicalConstants<f64>;
pub type OperatorMatrix = operator::OperatorMatrix<f64>;
pub type WellSolution = oscillator::WellSolution<f64>;
pub type ReducedQubit = hamiltonian::ReducedQubit<f64>;
pub type IsingModel = hamiltonian::IsingModel<f64>;
pub type SpectrumResult = spectrum::SpectrumResult<f64>;
pub type GapDiagnostics = spectrum::GapDiagnostics<f64>;
pub type CouplingStrengths = swt::CouplingStrengths<f64>;
