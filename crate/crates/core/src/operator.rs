//! Dense Hermitian operators with basis bookkeeping.
//!
//! Every Hamiltonian in the model is real in the bases used here (the phase
//! operator, its cosine and the ladder quadrature all have real matrix
//! elements), so Hermitian reduces to real symmetric and storage is real.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::scalar::{lit, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("basis dimension {basis} does not match matrix dimension {rows}×{cols}")]
    DimensionMismatch {
        basis: usize,
        rows: usize,
        cols: usize,
    },
    #[error("matrix is not Hermitian: relative asymmetry {0:.3e}")]
    NotHermitian(f64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BasisTag {
    /// Harmonic-oscillator number states 0..n.
    Oscillator(usize),
    /// Lowest eigenstates of the coupler Hamiltonian.
    CouplerEigen(usize),
    /// Lowest two eigenstates of a qubit Hamiltonian.
    Qubit2Level,
    /// Tensor product, leftmost factor slowest.
    Product(Vec<BasisTag>),
}

impl BasisTag {
    pub fn dim(&self) -> usize {
        match self {
            BasisTag::Oscillator(n) | BasisTag::CouplerEigen(n) => *n,
            BasisTag::Qubit2Level => 2,
            BasisTag::Product(parts) => parts.iter().map(BasisTag::dim).product(),
        }
    }

    /// Dimension of the trailing coupler factor, if the basis ends in one.
    pub fn coupler_dim(&self) -> Option<usize> {
        match self {
            BasisTag::CouplerEigen(n) => Some(*n),
            BasisTag::Product(parts) => parts.last().and_then(BasisTag::coupler_dim),
            _ => None,
        }
    }

    pub fn four_qubits() -> Self {
        BasisTag::Product(vec![BasisTag::Qubit2Level; 4])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    Hz,
    Dimensionless,
}

/// Relative Frobenius tolerance for the Hermiticity check.
pub const HERMITIAN_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix<T: Scalar> {
    pub data: DMatrix<T>,
    pub basis: BasisTag,
    pub units: Units,
}

impl<T: Scalar> OperatorMatrix<T> {
    /// Wrap `data`, enforcing square shape, basis dimension and Hermiticity;
    /// the stored matrix is the exact symmetric part.
    pub fn new(data: DMatrix<T>, basis: BasisTag, units: Units) -> Result<Self, OperatorError> {
        let d = basis.dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(OperatorError::DimensionMismatch {
                basis: d,
                rows: data.nrows(),
                cols: data.ncols(),
            });
        }
        let asym = relative_asymmetry(&data);
        if asym > lit(HERMITIAN_RTOL) {
            return Err(OperatorError::NotHermitian(
                asym.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(Self {
            data: symmetrize(data),
            basis,
            units,
        })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        relative_asymmetry(&self.data) <= lit(HERMITIAN_RTOL)
    }
}

/// ‖A − Aᵀ‖_F / ‖A‖_F (zero for the zero matrix).
pub fn relative_asymmetry<T: Scalar>(a: &DMatrix<T>) -> T {
    let norm = a.norm();
    if norm == T::zero() {
        return T::zero();
    }
    (a - a.transpose()).norm() / norm
}

pub fn symmetrize<T: Scalar>(a: DMatrix<T>) -> DMatrix<T> {
    let t = a.transpose();
    (a + t) * lit::<T>(0.5)
}

pub fn commutator<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a * b - b * a
}

/// `op` acting on factor `site` of `n_sites` two-level systems, identity elsewhere.
pub fn embed_qubit<T: Scalar>(op: &DMatrix<T>, site: usize, n_sites: usize) -> DMatrix<T> {
    let id = DMatrix::<T>::identity(2, 2);
    let mut out = DMatrix::<T>::identity(1, 1);
    for k in 0..n_sites {
        out = out.kronecker(if k == site { op } else { &id });
    }
    out
}

/// Symmetric eigendecomposition, eigenvalues ascending; each eigenvector is
/// sign-fixed so its largest-magnitude component (first on ties) is positive.
pub fn eigh<T: Scalar>(a: &DMatrix<T>) -> (nalgebra::DVector<T>, DMatrix<T>) {
    let eig = nalgebra::SymmetricEigen::new(a.clone());
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = nalgebra::DVector::from_fn(n, |k, _| eig.eigenvalues[order[k]]);
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let mut best = 0;
        for i in 1..n {
            if col[i].abs() > col[best].abs() * lit(1.0 + 1e-9) {
                best = i;
            }
        }
        if col[best] < T::zero() {
            col = -col;
        }
        vectors.set_column(k, &col);
    }
    (values, vectors)
}
