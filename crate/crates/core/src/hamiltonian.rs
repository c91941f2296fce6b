//! Operator assembly: bare coupler and qubits, two-level reduction, the
//! four-qubit ⊗ coupler product Hamiltonian and the target Ising model.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::circuit::UnitlessParams;
use crate::operator::{eigh, embed_qubit, BasisTag, OperatorError, OperatorMatrix, Units};
use crate::oscillator::AnharmonicMode;
use crate::pauli::{self, N_QUBITS, PAIRS, TRIPLES};
use crate::scalar::{lit, to_f64, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("coupler screening β_c = {0} ≥ 1: harmonic expansion frame invalid")]
    CouplerMultiWell(f64),
    #[error("qubit {qubit}: no double well (β/(1+α²) = {ratio} ≤ 1)")]
    NoDoubleWell { qubit: usize, ratio: f64 },
    #[error("invalid truncation: {0}")]
    Truncation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub qubit_states: usize,
    pub coupler_states: usize,
    pub coupler_keep: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            qubit_states: 50,
            coupler_states: 40,
            coupler_keep: 8,
        }
    }
}

pub fn coupler_mode<T: Scalar>(u: &UnitlessParams<T>) -> AnharmonicMode<T> {
    AnharmonicMode::coupler(u.xi_c, u.beta_c, u.phi_cx)
}

pub fn qubit_mode<T: Scalar>(u: &UnitlessParams<T>, j: usize) -> AnharmonicMode<T> {
    AnharmonicMode::qubit(u.xi[j], u.beta[j], u.alpha[j], u.phi_x[j])
}

/// E_L̃c·(2ξ_c²q̂² + (φ̂ − φ_cx)²/2 + β_c cos φ̂) in Hz.
pub fn build_coupler<T: Scalar>(
    u: &UnitlessParams<T>,
    n: usize,
) -> Result<OperatorMatrix<T>, HamiltonianError> {
    if u.beta_c >= T::one() {
        return Err(HamiltonianError::CouplerMultiWell(to_f64(u.beta_c)));
    }
    if n < 10 {
        return Err(HamiltonianError::Truncation(format!(
            "coupler needs ≥ 10 oscillator states, got {n}"
        )));
    }
    let h = coupler_mode(u).hamiltonian(n) * u.e_l_tilde_c;
    Ok(OperatorMatrix::new(h, BasisTag::Oscillator(n), Units::Hz)?)
}

/// E_Lj·(2ξ_j²q̂² + (1+α_j²)(φ̂ − φ_jx)²/2 + β_j cos φ̂) in Hz.
pub fn build_qubit_bare<T: Scalar>(
    u: &UnitlessParams<T>,
    j: usize,
    n: usize,
) -> Result<OperatorMatrix<T>, HamiltonianError> {
    let ratio = u.beta[j] / (T::one() + u.alpha[j] * u.alpha[j]);
    if ratio <= T::one() {
        return Err(HamiltonianError::NoDoubleWell {
            qubit: j + 1,
            ratio: to_f64(ratio),
        });
    }
    if n < 10 {
        return Err(HamiltonianError::Truncation(format!(
            "qubit needs ≥ 10 oscillator states, got {n}"
        )));
    }
    let h = qubit_mode(u, j).hamiltonian(n) * u.e_l[j];
    Ok(OperatorMatrix::new(h, BasisTag::Oscillator(n), Units::Hz)?)
}

/// A qubit restricted to its two lowest eigenstates (energy basis, ground first).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedQubit<T: Scalar> {
    /// diag(−ω/2, ω/2) in Hz.
    pub h2: DMatrix<T>,
    pub phi2: DMatrix<T>,
    /// Persistent-current Pauli Ẑ: φ2 = φ̄·𝟙 + s_effective·Ẑ.
    pub z2: DMatrix<T>,
    pub s_effective: T,
    pub splitting: T,
    /// Levels 2 and 3 closer than 1e−9 relative: the two-level cut is ambiguous.
    pub gauge_warning: bool,
}

impl<T: Scalar> ReducedQubit<T> {
    pub fn phi01(&self) -> T {
        self.phi2[(0, 1)]
    }

    pub fn phi_mean(&self) -> T {
        (self.phi2[(0, 0)] + self.phi2[(1, 1)]) / lit(2.0)
    }
}

/// Diagonalize a qubit and keep the lowest doublet; the excited vector's sign
/// makes ⟨0|φ̂|1⟩ ≥ 0.
pub fn reduce_qubit<T: Scalar>(h: &OperatorMatrix<T>, mode: &AnharmonicMode<T>) -> ReducedQubit<T> {
    let n = h.dim();
    let (e, mut v) = eigh(&h.data);
    let phi = mode.phase_operator(n);
    let v2 = v.columns(0, 2).into_owned();
    let mut phi2 = v2.transpose() * &phi * &v2;
    if phi2[(0, 1)] < T::zero() {
        let flipped = -v.column(1).into_owned();
        v.set_column(1, &flipped);
        phi2[(0, 1)] = -phi2[(0, 1)];
        phi2[(1, 0)] = -phi2[(1, 0)];
    }
    let phi2 = crate::operator::symmetrize(phi2);
    let splitting = e[1] - e[0];
    let half = splitting / lit(2.0);
    let h2 = DMatrix::from_row_slice(2, 2, &[-half, T::zero(), T::zero(), half]);
    let gauge_warning = n > 2 && (e[2] - e[1]).abs() <= lit::<T>(1e-9) * e[2].abs().max(e[1].abs());
    let (s_effective, z2) = persistent_frame(&phi2);
    ReducedQubit {
        h2,
        phi2,
        z2,
        s_effective,
        splitting,
        gauge_warning,
    }
}

/// Split φ2 = φ̄·𝟙 + δ·Ẑ with Ẑ² = 𝟙; falls back to σx when φ2 ∝ 𝟙.
fn persistent_frame<T: Scalar>(phi2: &DMatrix<T>) -> (T, DMatrix<T>) {
    let dz = (phi2[(0, 0)] - phi2[(1, 1)]) / lit(2.0);
    let dx = phi2[(0, 1)];
    let delta = (dz * dz + dx * dx).sqrt();
    if delta == T::zero() {
        return (T::zero(), pauli::sigma_x());
    }
    let z = DMatrix::from_row_slice(2, 2, &[dz / delta, dx / delta, dx / delta, -dz / delta]);
    (delta, z)
}

/// Coupler eigenstates: energies (Hz) and φ̂_c in that eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplerEigensystem<T: Scalar> {
    pub energies: DVector<T>,
    pub phase: DMatrix<T>,
    pub n_trunc: usize,
}

impl<T: Scalar> CouplerEigensystem<T> {
    pub fn gap(&self) -> T {
        self.energies[1] - self.energies[0]
    }

    /// Lowest `k` eigenstates only.
    pub fn truncated(&self, k: usize) -> Self {
        Self {
            energies: self.energies.rows(0, k).into_owned(),
            phase: self.phase.view((0, 0), (k, k)).into_owned(),
            n_trunc: self.n_trunc,
        }
    }
}

pub fn diagonalize_coupler<T: Scalar>(
    u: &UnitlessParams<T>,
    n: usize,
) -> Result<CouplerEigensystem<T>, HamiltonianError> {
    let h = build_coupler(u, n)?;
    let (energies, v) = eigh(&h.data);
    let phi = coupler_mode(u).phase_operator(n);
    let phase = crate::operator::symmetrize(v.transpose() * phi * &v);
    Ok(CouplerEigensystem {
        energies,
        phase,
        n_trunc: n,
    })
}

/// H = Σ_j h2_j + H_c + E_L̃c·[Σ_{i<j} α_iα_j φ̂_iφ̂_j + Σ_j α_j φ̂_c φ̂_j − φ_cx Σ_j α_j φ̂_j]
/// on the 16·n_keep product space; coupler index fastest.
pub fn assemble_full<T: Scalar>(
    qubits: &[ReducedQubit<T>; N_QUBITS],
    coupler: &CouplerEigensystem<T>,
    u: &UnitlessParams<T>,
    n_keep: usize,
) -> Result<OperatorMatrix<T>, HamiltonianError> {
    if n_keep < 1 || n_keep > coupler.energies.len() {
        return Err(HamiltonianError::Truncation(format!(
            "n_keep = {n_keep} outside 1..={}",
            coupler.energies.len()
        )));
    }
    for (j, q) in qubits.iter().enumerate() {
        if q.h2.shape() != (2, 2) || q.phi2.shape() != (2, 2) {
            return Err(HamiltonianError::Truncation(format!(
                "qubit {} is not two-level",
                j + 1
            )));
        }
    }
    let e = u.e_l_tilde_c;
    let id_c = DMatrix::<T>::identity(n_keep, n_keep);
    let hc = DMatrix::from_diagonal(&coupler.energies.rows(0, n_keep).into_owned());
    let phic = coupler.phase.view((0, 0), (n_keep, n_keep)).into_owned();
    let phis: Vec<DMatrix<T>> = (0..N_QUBITS)
        .map(|j| embed_qubit(&qubits[j].phi2, j, N_QUBITS))
        .collect();

    let mut q_only = pauli::sum_local(&std::array::from_fn(|j| qubits[j].h2.clone()));
    for &(i, j) in PAIRS.iter() {
        q_only += &phis[i] * &phis[j] * (e * u.alpha[i] * u.alpha[j]);
    }
    let mut qubit_linear = DMatrix::<T>::zeros(16, 16);
    for j in 0..N_QUBITS {
        qubit_linear += &phis[j] * u.alpha[j];
    }
    q_only -= &qubit_linear * (e * u.phi_cx);

    let h = q_only.kronecker(&id_c)
        + DMatrix::<T>::identity(16, 16).kronecker(&hc)
        + qubit_linear.kronecker(&phic) * e;
    let basis = BasisTag::Product(vec![
        BasisTag::Qubit2Level,
        BasisTag::Qubit2Level,
        BasisTag::Qubit2Level,
        BasisTag::Qubit2Level,
        BasisTag::CouplerEigen(n_keep),
    ]);
    Ok(OperatorMatrix::new(h, basis, Units::Hz)?)
}

/// Everything needed downstream for one parameter point.
#[derive(Debug, Clone)]
pub struct CircuitModel<T: Scalar> {
    pub params: UnitlessParams<T>,
    pub truncation: Truncation,
    pub qubits: [ReducedQubit<T>; N_QUBITS],
    pub coupler: CouplerEigensystem<T>,
    pub hamiltonian: OperatorMatrix<T>,
}

impl<T: Scalar> CircuitModel<T> {
    pub fn build(u: &UnitlessParams<T>, t: Truncation) -> Result<Self, HamiltonianError> {
        let coupler = diagonalize_coupler(u, t.coupler_states)?;
        let mut qubits = Vec::with_capacity(N_QUBITS);
        for j in 0..N_QUBITS {
            let h = build_qubit_bare(u, j, t.qubit_states)?;
            qubits.push(reduce_qubit(&h, &qubit_mode(u, j)));
        }
        let qubits: [ReducedQubit<T>; N_QUBITS] = qubits.try_into().expect("four qubits");
        let hamiltonian = assemble_full(&qubits, &coupler, u, t.coupler_keep)?;
        Ok(Self {
            params: *u,
            truncation: t,
            qubits,
            coupler,
            hamiltonian,
        })
    }

    /// Bare qubit terms and persistent-current frames, couplings zero.
    pub fn bare_ising(&self) -> IsingModel<T> {
        IsingModel::from_reduced(&self.qubits)
    }
}

/// Σ_j h_j + Σ J1_j Ẑ_j + Σ_{i<j} J2_ij Ẑ_iẐ_j + Σ_{i<j<k} J3_ijk Ẑ_iẐ_jẐ_k + J4 Ẑ_1Ẑ_2Ẑ_3Ẑ_4,
/// with h_j diagonal in the energy basis and Ẑ_j the persistent-current Pauli.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel<T: Scalar> {
    pub bare: [DMatrix<T>; N_QUBITS],
    pub z: [DMatrix<T>; N_QUBITS],
    pub j1: [T; 4],
    pub j2: [T; 6],
    pub j3: [T; 4],
    pub j4: T,
}

impl<T: Scalar> IsingModel<T> {
    /// Symmetric double wells: h = −(ω/2)σz and Ẑ = σx in the energy basis.
    pub fn from_splittings(omega: [T; N_QUBITS]) -> Self {
        let half = lit::<T>(0.5);
        Self {
            bare: std::array::from_fn(|j| pauli::sigma_z::<T>() * (-omega[j] * half)),
            z: std::array::from_fn(|_| pauli::sigma_x()),
            j1: [T::zero(); 4],
            j2: [T::zero(); 6],
            j3: [T::zero(); 4],
            j4: T::zero(),
        }
    }

    pub fn from_reduced(qubits: &[ReducedQubit<T>; N_QUBITS]) -> Self {
        Self {
            bare: std::array::from_fn(|j| qubits[j].h2.clone()),
            z: std::array::from_fn(|j| qubits[j].z2.clone()),
            j1: [T::zero(); 4],
            j2: [T::zero(); 6],
            j3: [T::zero(); 4],
            j4: T::zero(),
        }
    }

    pub fn with_uniform(mut self, j1: T, j2: T, j3: T, j4: T) -> Self {
        self.j1 = [j1; 4];
        self.j2 = [j2; 6];
        self.j3 = [j3; 4];
        self.j4 = j4;
        self
    }

    /// Splitting of each bare term (difference of its eigenvalues).
    pub fn splittings(&self) -> [T; N_QUBITS] {
        std::array::from_fn(|j| {
            let b = &self.bare[j];
            let tr = (b[(0, 0)] - b[(1, 1)]) / lit(2.0);
            lit::<T>(2.0) * (tr * tr + b[(0, 1)] * b[(0, 1)]).sqrt()
        })
    }

    pub fn bare_hamiltonian(&self) -> DMatrix<T> {
        pauli::sum_local(&self.bare)
    }

    pub fn interaction(&self) -> DMatrix<T> {
        let mut h = DMatrix::zeros(16, 16);
        for j in 0..N_QUBITS {
            h += pauli::z_string(1 << j, &self.z) * self.j1[j];
        }
        for (p, &(i, j)) in PAIRS.iter().enumerate() {
            h += pauli::z_string(pauli::pair_mask(i, j), &self.z) * self.j2[p];
        }
        for (t, &(i, j, k)) in TRIPLES.iter().enumerate() {
            h += pauli::z_string(pauli::triple_mask(i, j, k), &self.z) * self.j3[t];
        }
        h + pauli::z_string(pauli::ALL_MASK, &self.z) * self.j4
    }
}

pub fn assemble_ising_model<T: Scalar>(m: &IsingModel<T>) -> OperatorMatrix<T> {
    OperatorMatrix::new(
        m.bare_hamiltonian() + m.interaction(),
        BasisTag::four_qubits(),
        Units::Hz,
    )
    .expect("Ising model is Hermitian by construction")
}
