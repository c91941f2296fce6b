//! Physical circuit values and the dimensionless parameters derived from them.

use thiserror::Error;

use crate::oscillator;
use crate::scalar::{lit, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("{name} must be strictly positive (got {value})")]
    NonPositive { name: String, value: f64 },
    #[error("{name} must not be negative (got {value})")]
    Negative { name: String, value: f64 },
    #[error("mutual inductance of qubit {qubit} violates M² < L_j·L_c")]
    MutualTooLarge { qubit: usize },
    #[error("unphysical mutual inductance network: rescaled coupler inductance {l_tilde} H is not positive")]
    UnphysicalNetwork { l_tilde: f64 },
}

/// CODATA 2018 exact SI constants; the derived ones are computed, not stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants<T> {
    pub planck_h: T,
    pub electron_charge: T,
    pub flux_quantum: T,
    pub resistance_quantum: T,
}

impl<T: Scalar> PhysicalConstants<T> {
    pub fn from_fundamental(planck_h: T, electron_charge: T) -> Self {
        Self {
            planck_h,
            electron_charge,
            flux_quantum: planck_h / (electron_charge + electron_charge),
            resistance_quantum: planck_h / (electron_charge * electron_charge),
        }
    }

    pub fn si() -> Self {
        Self::from_fundamental(lit(6.626_070_15e-34), lit(1.602_176_634e-19))
    }

    /// Φ₀/2π, the reduced flux quantum.
    pub fn reduced_flux_quantum(&self) -> T {
        self.flux_quantum / T::two_pi()
    }

    /// Inductive energy (Φ₀/2π)²/L expressed as a frequency.
    pub fn inductive_energy_hz(&self, inductance: T) -> T {
        let phi = self.reduced_flux_quantum();
        phi * phi / inductance / self.planck_h
    }
}

impl<T: Scalar> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self::si()
    }
}

/// Physical circuit values in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams<T> {
    pub qubit_inductance: [T; 4],
    pub qubit_capacitance: [T; 4],
    pub qubit_critical_current: [T; 4],
    pub mutual_inductance: [T; 4],
    pub coupler_inductance: T,
    pub coupler_capacitance: T,
    pub coupler_critical_current: T,
    pub coupler_flux: T,
    pub qubit_flux: [T; 4],
}

impl<T: Scalar> CircuitParams<T> {
    /// Four identical 817 pH / 77 fF flux qubits with β_j = 1.1, coupled through
    /// 40 pH mutuals to a 170 pH / 407 fF coupler; every loop biased at Φ₀/2.
    pub fn reference_device(beta_c: T) -> Self {
        let c = PhysicalConstants::<T>::si();
        let l_j: T = lit(817e-12);
        let m: T = lit(40e-12);
        let l_c: T = lit(170e-12);
        let l_tilde = l_c - lit::<T>(4.0) * m * m / l_j;
        let half = c.flux_quantum / lit(2.0);
        Self {
            qubit_inductance: [l_j; 4],
            qubit_capacitance: [lit(77e-15); 4],
            qubit_critical_current: [critical_current_for_beta(lit(1.1), l_j, &c); 4],
            mutual_inductance: [m; 4],
            coupler_inductance: l_c,
            coupler_capacitance: lit(407e-15),
            coupler_critical_current: critical_current_for_beta(beta_c, l_tilde, &c),
            coupler_flux: half,
            qubit_flux: [half; 4],
        }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        let positive = |name: String, v: T| {
            if v > T::zero() {
                Ok(())
            } else {
                Err(CircuitError::NonPositive {
                    name,
                    value: v.to_f64().unwrap_or(f64::NAN),
                })
            }
        };
        for j in 0..4 {
            positive(format!("L_j{}", j + 1), self.qubit_inductance[j])?;
            positive(format!("C_j{}", j + 1), self.qubit_capacitance[j])?;
            positive(format!("I_cj{}", j + 1), self.qubit_critical_current[j])?;
            if self.mutual_inductance[j] < T::zero() {
                return Err(CircuitError::Negative {
                    name: format!("M_j{}", j + 1),
                    value: self.mutual_inductance[j].to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        positive("L_c".into(), self.coupler_inductance)?;
        positive("C_c".into(), self.coupler_capacitance)?;
        positive("I_cc".into(), self.coupler_critical_current)?;
        for j in 0..4 {
            let m = self.mutual_inductance[j];
            if m * m >= self.qubit_inductance[j] * self.coupler_inductance {
                return Err(CircuitError::MutualTooLarge { qubit: j + 1 });
            }
        }
        Ok(())
    }
}

/// Dimensionless parameters. Energies are frequencies (energy/h, Hz); flux
/// offsets are phases shifted so that half-flux-quantum bias sits at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitlessParams<T> {
    pub alpha: [T; 4],
    pub l_tilde_c: T,
    pub e_l_tilde_c: T,
    pub e_l: [T; 4],
    pub xi_c: T,
    pub xi: [T; 4],
    pub beta_c: T,
    pub beta: [T; 4],
    pub phi_cx: T,
    pub phi_x: [T; 4],
}

impl<T: Scalar> UnitlessParams<T> {
    /// Identical qubits throughout (the closed-form branch needs this).
    pub fn qubits_identical(&self, rtol: T) -> bool {
        let close = |a: T, b: T| (a - b).abs() <= rtol * a.abs().max(b.abs());
        (1..4).all(|j| {
            close(self.alpha[j], self.alpha[0])
                && close(self.xi[j], self.xi[0])
                && close(self.beta[j], self.beta[0])
                && close(self.e_l[j], self.e_l[0])
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegimeWarning {
    /// β_c ≥ 1: the coupler is no longer a single-well high-frequency mode.
    CouplerMultiWell { beta_c: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivation<T> {
    pub params: UnitlessParams<T>,
    pub warnings: Vec<RegimeWarning>,
}

/// Impedance parameter ξ = 4π·√(L/C)/R_Q.
pub fn impedance_parameter<T: Scalar>(l: T, c: T, k: &PhysicalConstants<T>) -> T {
    lit::<T>(2.0) * T::two_pi() * (l / c).sqrt() / k.resistance_quantum
}

/// The same quantity written as (2πe/Φ₀)·√(L/C).
pub fn impedance_parameter_josephson<T: Scalar>(l: T, c: T, k: &PhysicalConstants<T>) -> T {
    T::two_pi() * k.electron_charge / k.flux_quantum * (l / c).sqrt()
}

/// β = 2π·L·I_c/Φ₀.
pub fn screening_parameter<T: Scalar>(l: T, i_c: T, k: &PhysicalConstants<T>) -> T {
    T::two_pi() * l * i_c / k.flux_quantum
}

pub fn critical_current_for_beta<T: Scalar>(beta: T, l: T, k: &PhysicalConstants<T>) -> T {
    beta * k.flux_quantum / (T::two_pi() * l)
}

pub fn capacitance_for_xi<T: Scalar>(xi: T, l: T, k: &PhysicalConstants<T>) -> T {
    let z = xi * k.resistance_quantum / (lit::<T>(2.0) * T::two_pi());
    l / (z * z)
}

/// φ = 2πΦ/Φ₀ − π.
pub fn flux_phase<T: Scalar>(flux: T, k: &PhysicalConstants<T>) -> T {
    T::two_pi() * flux / k.flux_quantum - T::pi()
}

pub fn flux_from_phase<T: Scalar>(phase: T, k: &PhysicalConstants<T>) -> T {
    (phase + T::pi()) * k.flux_quantum / T::two_pi()
}

pub fn derive_unitless<T: Scalar>(
    p: &CircuitParams<T>,
    k: &PhysicalConstants<T>,
) -> Result<Derivation<T>, CircuitError> {
    p.validate()?;
    let alpha: [T; 4] = std::array::from_fn(|j| p.mutual_inductance[j] / p.qubit_inductance[j]);
    let l_tilde_c = (0..4).fold(p.coupler_inductance, |acc, j| {
        acc - alpha[j] * p.mutual_inductance[j]
    });
    if l_tilde_c <= T::zero() {
        return Err(CircuitError::UnphysicalNetwork {
            l_tilde: l_tilde_c.to_f64().unwrap_or(f64::NAN),
        });
    }
    let params = UnitlessParams {
        alpha,
        l_tilde_c,
        e_l_tilde_c: k.inductive_energy_hz(l_tilde_c),
        e_l: std::array::from_fn(|j| k.inductive_energy_hz(p.qubit_inductance[j])),
        xi_c: impedance_parameter(l_tilde_c, p.coupler_capacitance, k),
        xi: std::array::from_fn(|j| {
            impedance_parameter(p.qubit_inductance[j], p.qubit_capacitance[j], k)
        }),
        beta_c: screening_parameter(l_tilde_c, p.coupler_critical_current, k),
        beta: std::array::from_fn(|j| {
            screening_parameter(p.qubit_inductance[j], p.qubit_critical_current[j], k)
        }),
        phi_cx: flux_phase(p.coupler_flux, k),
        phi_x: std::array::from_fn(|j| flux_phase(p.qubit_flux[j], k)),
    };
    let mut warnings = Vec::new();
    if params.beta_c >= T::one() {
        warnings.push(RegimeWarning::CouplerMultiWell {
            beta_c: params.beta_c.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(Derivation { params, warnings })
}

/// Rebuild the physical values that the unitless set pins down at fixed
/// inductances: critical currents from β, capacitances from ξ, fluxes from φ.
pub fn invert_at_fixed_inductance<T: Scalar>(
    u: &UnitlessParams<T>,
    template: &CircuitParams<T>,
    k: &PhysicalConstants<T>,
) -> CircuitParams<T> {
    let mut p = *template;
    for j in 0..4 {
        let l = p.qubit_inductance[j];
        p.qubit_critical_current[j] = critical_current_for_beta(u.beta[j], l, k);
        p.qubit_capacitance[j] = capacitance_for_xi(u.xi[j], l, k);
        p.qubit_flux[j] = flux_from_phase(u.phi_x[j], k);
    }
    p.coupler_critical_current = critical_current_for_beta(u.beta_c, u.l_tilde_c, k);
    p.coupler_capacitance = capacitance_for_xi(u.xi_c, u.l_tilde_c, k);
    p.coupler_flux = flux_from_phase(u.phi_cx, k);
    p
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport<T> {
    pub qubit_double_well: bool,
    pub coupler_single_well: bool,
    pub hierarchy: bool,
    /// 2·E_L̃c·ξ_c·√(1−β_c), zero once β_c ≥ 1.
    pub coupler_gap_estimate: T,
    /// Largest two-level splitting among the qubits.
    pub qubit_splitting_estimate: T,
}

/// Oscillator states used for the qubit splitting estimate.
const REGIME_QUBIT_STATES: usize = 50;

pub fn validate_regime<T: Scalar>(u: &UnitlessParams<T>) -> RegimeReport<T> {
    let qubit_double_well = (0..4).all(|j| u.beta[j] > T::one());
    let coupler_single_well = u.beta_c < T::one();
    let coupler_gap_estimate = if coupler_single_well {
        lit::<T>(2.0) * u.e_l_tilde_c * u.xi_c * (T::one() - u.beta_c).sqrt()
    } else {
        T::zero()
    };
    let qubit_splitting_estimate = (0..4)
        .map(|j| {
            let mode =
                oscillator::AnharmonicMode::qubit(u.xi[j], u.beta[j], u.alpha[j], u.phi_x[j]);
            mode.lowest_gap(REGIME_QUBIT_STATES) * u.e_l[j]
        })
        .fold(T::zero(), |a, b| if b > a { b } else { a });
    RegimeReport {
        qubit_double_well,
        coupler_single_well,
        hierarchy: coupler_gap_estimate > qubit_splitting_estimate,
        coupler_gap_estimate,
        qubit_splitting_estimate,
    }
}
