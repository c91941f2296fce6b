//! Z-string operators on four two-level systems.

use nalgebra::DMatrix;

use crate::operator::embed_qubit;
use crate::scalar::Scalar;

pub const N_QUBITS: usize = 4;
pub const DIM: usize = 16;

pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
pub const TRIPLES: [(usize, usize, usize); 4] = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)];

pub fn sigma_x<T: Scalar>() -> DMatrix<T> {
    DMatrix::from_row_slice(2, 2, &[T::zero(), T::one(), T::one(), T::zero()])
}

pub fn sigma_z<T: Scalar>() -> DMatrix<T> {
    DMatrix::from_row_slice(2, 2, &[T::one(), T::zero(), T::zero(), -T::one()])
}

/// Product of the per-qubit `frames[j]` over the qubits set in `mask`
/// (bit j ↔ qubit j, qubit 0 the slowest tensor factor).
pub fn z_string<T: Scalar>(mask: u8, frames: &[DMatrix<T>; N_QUBITS]) -> DMatrix<T> {
    let id = DMatrix::<T>::identity(2, 2);
    let mut out = DMatrix::<T>::identity(1, 1);
    for (j, frame) in frames.iter().enumerate() {
        out = out.kronecker(if mask & (1 << j) != 0 { frame } else { &id });
    }
    out
}

pub fn pair_mask(i: usize, j: usize) -> u8 {
    (1 << i) | (1 << j)
}

pub fn triple_mask(i: usize, j: usize, k: usize) -> u8 {
    (1 << i) | (1 << j) | (1 << k)
}

pub const ALL_MASK: u8 = 0b1111;

/// Σ_j op_j embedded on each site.
pub fn sum_local<T: Scalar>(ops: &[DMatrix<T>; N_QUBITS]) -> DMatrix<T> {
    ops.iter()
        .enumerate()
        .fold(DMatrix::zeros(DIM, DIM), |acc, (j, op)| {
            acc + embed_qubit(op, j, N_QUBITS)
        })
}

/// Frobenius inner product Tr(AᵀB).
pub fn inner<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    a.component_mul(b).sum()
}
