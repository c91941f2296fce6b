//! Diagonalization, coupler-subspace classification, effective Hamiltonian of
//! the coupler-ground block, coupling extraction and level-structure checks.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::fit::{levenberg_marquardt_with_jacobian, LmOptions};
use crate::hamiltonian::IsingModel;
use crate::operator::{eigh, relative_asymmetry, OperatorMatrix, HERMITIAN_RTOL};
use crate::pauli::{pair_mask, triple_mask, z_string, ALL_MASK, DIM, PAIRS, TRIPLES};
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::swt::{pauli_decompose_with, CouplingStrengths, Provenance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("matrix is not Hermitian: relative asymmetry {0:.3e}")]
    NotHermitian(f64),
    #[error("eigenpair residual {residual:.3e} exceeds 1e-10·‖H‖ = {bound:.3e}")]
    Residual { residual: f64, bound: f64 },
    #[error("expected 16 coupler-ground states, found {0}")]
    GroundCount(usize),
    #[error("coupler-ground block has no invertible overlap with coupler state 0")]
    SingularOverlap,
    #[error("effective Ising model does not describe this spectrum: rms residual {residual:.3e} of the mean splitting")]
    IsingMismatch {
        residual: f64,
        fit: Box<CouplingFit<f64>>,
    },
    #[error("qubit splittings differ by {0:.3e} (relative): degeneracy count not meaningful")]
    UnequalSplittings(f64),
    #[error("two-excitation manifold not identifiable: {0}")]
    ManifoldNotIdentifiable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subspace {
    CouplerGround,
    CouplerExcited,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult<T: Scalar> {
    pub eigenvalues: DVector<T>,
    pub eigenvectors: DMatrix<T>,
    pub subspace_label: Vec<Subspace>,
    pub coupler_occupation: Vec<T>,
    /// Dimension of the trailing coupler factor (1 for bare qubit operators).
    pub coupler_dim: usize,
}

/// Occupation above which a state counts as coupler-ground.
pub const GROUND_THRESHOLD: f64 = 0.5;

pub fn eigendecompose<T: Scalar>(
    h: &OperatorMatrix<T>,
) -> Result<SpectrumResult<T>, SpectrumError> {
    let asym = relative_asymmetry(&h.data);
    if asym > lit(HERMITIAN_RTOL) {
        return Err(SpectrumError::NotHermitian(to_f64(asym)));
    }
    let (values, vectors) = eigh(&h.data);
    let norm = values.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let bound = lit::<T>(1e-10) * norm;
    for k in 0..values.len() {
        let v = vectors.column(k);
        let r = (&h.data * v - v * values[k]).norm();
        if r > bound && norm > T::zero() {
            return Err(SpectrumError::Residual {
                residual: to_f64(r),
                bound: to_f64(bound),
            });
        }
    }
    let nc = h.basis.coupler_dim().unwrap_or(1);
    let dim = h.dim();
    let occupation: Vec<T> = (0..dim)
        .map(|k| (0..dim / nc).fold(T::zero(), |a, q| a + vectors[(q * nc, k)].powi(2)))
        .collect();
    let labels = occupation
        .iter()
        .map(|&o| {
            if o > lit(GROUND_THRESHOLD) {
                Subspace::CouplerGround
            } else {
                Subspace::CouplerExcited
            }
        })
        .collect();
    Ok(SpectrumResult {
        eigenvalues: values,
        eigenvectors: vectors,
        subspace_label: labels,
        coupler_occupation: occupation,
        coupler_dim: nc,
    })
}

impl<T: Scalar> SpectrumResult<T> {
    pub fn ground_indices(&self) -> Vec<usize> {
        (0..self.eigenvalues.len())
            .filter(|&k| self.subspace_label[k] == Subspace::CouplerGround)
            .collect()
    }

    pub fn ground_levels(&self) -> Vec<T> {
        self.ground_indices()
            .into_iter()
            .map(|k| self.eigenvalues[k])
            .collect()
    }

    pub fn excited_levels(&self) -> Vec<T> {
        (0..self.eigenvalues.len())
            .filter(|&k| self.subspace_label[k] == Subspace::CouplerExcited)
            .map(|k| self.eigenvalues[k])
            .collect()
    }

    /// Hermitian effective Hamiltonian on the qubit space whose spectrum is the
    /// 16 coupler-ground levels: with B the coupler-state-0 components,
    /// H = W·diag(E)·Wᵀ, W = (BBᵀ)^{−1/2}B.
    pub fn effective_hamiltonian(&self) -> Result<DMatrix<T>, SpectrumError> {
        let idx = self.ground_indices();
        if idx.len() != DIM {
            return Err(SpectrumError::GroundCount(idx.len()));
        }
        let nc = self.coupler_dim;
        let b = DMatrix::from_fn(DIM, DIM, |q, k| self.eigenvectors[(q * nc, idx[k])]);
        let (lam, u) = eigh(&(&b * b.transpose()));
        if lam[0] <= lit::<T>(1e-12) * lam[DIM - 1] {
            return Err(SpectrumError::SingularOverlap);
        }
        let inv_sqrt =
            &u * DMatrix::from_diagonal(&lam.map(|l| T::one() / l.sqrt())) * u.transpose();
        let w = inv_sqrt * b;
        let e = DVector::from_fn(DIM, |k, _| self.eigenvalues[idx[k]]);
        Ok(crate::operator::symmetrize(
            &w * DMatrix::from_diagonal(&e) * w.transpose(),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapDiagnostics<T> {
    pub delta_gap: T,
    pub delta_max: T,
    pub valid: bool,
    pub ground_count: usize,
}

pub const DEFAULT_GAP_THRESHOLD: f64 = 3.0;

pub fn gap_diagnostics<T: Scalar>(s: &SpectrumResult<T>, threshold: T) -> GapDiagnostics<T> {
    let mut ground = s.ground_levels();
    ground.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let excited_min = s
        .excited_levels()
        .into_iter()
        .fold(None, |m: Option<T>, v| Some(m.map_or(v, |m| m.min(v))));
    let top = ground.last().copied();
    let delta_gap = match (excited_min, top) {
        (Some(e), Some(t)) => e - t,
        _ => T::zero(),
    };
    let delta_max = ground.windows(2).fold(T::zero(), |a, w| a.max(w[1] - w[0]));
    GapDiagnostics {
        delta_gap,
        delta_max,
        valid: ground.len() == DIM && excited_min.is_some() && delta_gap > threshold * delta_max,
        ground_count: ground.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<T> {
    pub fit_j1: bool,
    pub fit_j3: bool,
    /// Accepted rms level residual, relative to the mean qubit splitting.
    pub max_residual: T,
    pub lm: LmOptions<T>,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            fit_j1: false,
            fit_j3: false,
            max_residual: lit(1e-3),
            lm: LmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingFit<T: Scalar> {
    pub couplings: CouplingStrengths<T>,
    /// Per-site, per-pair and per-triple coefficients of the fitted model.
    pub model: IsingModel<T>,
    /// Direct projection of the effective Hamiltonian onto the model terms,
    /// before the eigenvalue fit.
    pub projection: CouplingStrengths<T>,
    /// Multiplier of the bare qubit terms (1 = unrenormalized).
    pub bare_scale: T,
    /// rms(model − target levels, both mean-removed) / mean splitting.
    pub residual: T,
    /// Operator-norm part of the effective Hamiltonian outside the model, same units.
    pub projection_residual: T,
    pub iterations: usize,
}

impl CouplingFit<f64> {
    fn boxed(&self) -> Box<Self> {
        Box::new(self.clone())
    }
}

fn centered_sorted<T: Scalar>(mut v: Vec<T>) -> Vec<T> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = v.iter().fold(T::zero(), |a, &b| a + b) / from_usize(v.len());
    v.into_iter().map(|x| x - mean).collect()
}

fn mean<T: Scalar>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |a, &b| a + b) / from_usize(xs.len())
}

/// Least-squares fit of the Ising model to the coupler-ground spectrum.
///
/// The effective Hamiltonian of the coupler-ground block is projected onto the
/// bare terms and every Z-string, which seeds all site/pair/triple
/// coefficients. Levenberg–Marquardt then adjusts J4, a uniform offset of the
/// pair couplings, the bare-term scale and optionally uniform offsets of the
/// one- and three-body terms so that the model spectrum reproduces the levels.
pub fn extract_couplings(
    s: &SpectrumResult<f64>,
    bare: &IsingModel<f64>,
    opts: &FitOptions<f64>,
) -> Result<CouplingFit<f64>, SpectrumError> {
    let h_eff = s.effective_hamiltonian()?;
    let target = centered_sorted(s.ground_levels());
    let bare_h = bare.bare_hamiltonian();
    let seed = pauli_decompose_with(&h_eff, &bare.z, std::slice::from_ref(&bare_h));
    let scale0 = seed.extra[0];
    let omega = mean(&bare.splittings());
    let omega = if omega > 0.0 { omega } else { 1.0 };

    let base = IsingModel {
        j1: seed.j1,
        j2: seed.j2,
        j3: seed.j3,
        j4: seed.j4,
        ..bare.clone()
    };
    // The model is linear in its parameters: H(p) = H_fixed + Σ p_i·O_i.
    let uniform = |masks: &[u8]| {
        masks.iter().fold(DMatrix::zeros(DIM, DIM), |acc, &m| {
            acc + z_string(m, &bare.z) * omega
        })
    };
    let mut ops = vec![
        uniform(&[ALL_MASK]),
        uniform(&PAIRS.map(|(i, j)| pair_mask(i, j))),
        bare_h.clone(),
    ];
    if opts.fit_j1 {
        ops.push(uniform(&[1, 2, 4, 8]));
    }
    if opts.fit_j3 {
        ops.push(uniform(&TRIPLES.map(|(i, j, k)| triple_mask(i, j, k))));
    }
    let fixed = IsingModel {
        j4: 0.0,
        ..base.clone()
    }
    .interaction();
    let model_fn = |p: &DVector<f64>| {
        let h = ops
            .iter()
            .zip(p.iter())
            .fold(fixed.clone(), |acc, (o, &c)| acc + o * c);
        let (e, v) = eigh(&h);
        let e_mean = e.mean();
        let r = DVector::from_fn(DIM, |k, _| (e[k] - e_mean - target[k]) / omega);
        // Hellmann–Feynman: ∂E_k/∂p_i = v_kᵀ O_i v_k.
        let mut jac = DMatrix::zeros(DIM, ops.len());
        for (i, o) in ops.iter().enumerate() {
            let d = DVector::from_fn(DIM, |k, _| {
                (v.column(k).transpose() * o * v.column(k))[(0, 0)]
            });
            let d_mean = d.mean();
            jac.set_column(i, &d.map(|x| (x - d_mean) / omega));
        }
        (r, jac)
    };
    let mut x0 = DVector::zeros(ops.len());
    x0[0] = seed.j4 / omega;
    x0[2] = scale0;
    let rep = levenberg_marquardt_with_jacobian(model_fn, x0, opts.lm);
    let p = &rep.params;
    let mut model = base.clone();
    model.j4 = p[0] * omega;
    model.j2.iter_mut().for_each(|j| *j += p[1] * omega);
    let bare_scale = p[2];
    let mut k = 3;
    if opts.fit_j1 {
        model.j1.iter_mut().for_each(|j| *j += p[k] * omega);
        k += 1;
    }
    if opts.fit_j3 {
        model.j3.iter_mut().for_each(|j| *j += p[k] * omega);
    }
    let residual = rep.cost / (DIM as f64).sqrt();

    let mut couplings = CouplingStrengths {
        j1: mean(&model.j1),
        j2: mean(&model.j2),
        j3: mean(&model.j3),
        j4: model.j4,
        shift: seed.identity,
        provenance: Provenance::SpectralFit,
        spread: [spread(&model.j1), spread(&model.j2), spread(&model.j3)],
        warnings: Vec::new(),
    };
    if !opts.fit_j3 && mean(&model.j3).abs() > 1e-6 * omega {
        couplings.warnings.push(format!(
            "three-body term held at its projected value {:.4e} Hz",
            couplings.j3
        ));
    }
    let projection = seed.strengths(Provenance::SpectralFit);
    let fit = CouplingFit {
        couplings,
        projection,
        model,
        bare_scale,
        residual,
        projection_residual: seed.residual / omega,
        iterations: rep.iterations,
    };
    if residual > opts.max_residual {
        return Err(SpectrumError::IsingMismatch {
            residual,
            fit: fit.boxed(),
        });
    }
    Ok(fit)
}

fn spread(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoExcitation<T> {
    /// Six manifold levels, ascending.
    pub levels: Vec<T>,
    /// Cluster sizes in ascending energy order.
    pub degeneracies: Vec<usize>,
    /// Top-bottom distance of the manifold (3·J4 at the J4 = −2·J2 point).
    pub splitting: T,
    /// Smallest weight of a manifold state on the bare two-excitation states.
    pub min_weight: T,
}

impl<T> TwoExcitation<T> {
    /// Degeneracies sorted ascending.
    pub fn multiset(&self) -> Vec<usize> {
        let mut m = self.degeneracies.clone();
        m.sort_unstable();
        m
    }
}

/// Relative spread of the splittings tolerated by `two_excitation_splitting`.
pub const EQUAL_SPLITTING_RTOL: f64 = 1e-6;

/// The six coupler-ground levels whose eigenvectors carry the most weight on
/// the bare two-excitation states, ascending, with the smallest such weight.
pub fn two_excitation_levels<T: Scalar>(
    s: &SpectrumResult<T>,
) -> Result<(Vec<T>, T), SpectrumError> {
    let h_eff = s.effective_hamiltonian()?;
    let (e, v) = eigh(&h_eff);
    let two: Vec<usize> = (0..DIM).filter(|q| q.count_ones() == 2).collect();
    let mut weighted: Vec<(T, usize)> = (0..DIM)
        .map(|k| (two.iter().fold(T::zero(), |a, &q| a + v[(q, k)].powi(2)), k))
        .collect();
    weighted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let chosen = &weighted[..6];
    let min_weight = chosen.iter().fold(T::one(), |a, w| a.min(w.0));
    if min_weight <= lit(0.5) {
        return Err(SpectrumError::ManifoldNotIdentifiable(format!(
            "a manifold state carries only {:.3} weight on two-excitation states",
            to_f64(min_weight)
        )));
    }
    let mut levels: Vec<T> = chosen.iter().map(|&(_, k)| e[k]).collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok((levels, min_weight))
}

/// Cluster the six coupler-ground levels whose eigenvectors live on the bare
/// two-excitation states (two qubits excited). Levels closer than
/// `cluster_tol` × (manifold spread) join a cluster; spreads below 1e-12 of the
/// mean splitting count as one exact degeneracy.
pub fn two_excitation_splitting<T: Scalar>(
    s: &SpectrumResult<T>,
    splittings: [T; 4],
    cluster_tol: T,
) -> Result<TwoExcitation<T>, SpectrumError> {
    let omega = splittings.iter().fold(T::zero(), |a, &b| a + b) / lit(4.0);
    let hi = splittings.iter().fold(splittings[0], |a, &b| a.max(b));
    let lo = splittings.iter().fold(splittings[0], |a, &b| a.min(b));
    let rel = (hi - lo) / omega.abs();
    if rel > lit(EQUAL_SPLITTING_RTOL) {
        return Err(SpectrumError::UnequalSplittings(to_f64(rel)));
    }
    let (levels, min_weight) = two_excitation_levels(s)?;
    let spread = levels[5] - levels[0];
    let tol = (cluster_tol * spread).max(lit::<T>(1e-12) * omega.abs());
    let mut degeneracies = vec![1usize];
    for w in levels.windows(2) {
        if w[1] - w[0] <= tol {
            *degeneracies.last_mut().unwrap() += 1;
        } else {
            degeneracies.push(1);
        }
    }
    Ok(TwoExcitation {
        levels,
        degeneracies,
        splitting: spread,
        min_weight,
    })
}

/// Pair and triple lists re-exported for table headers.
pub fn pair_labels() -> Vec<String> {
    PAIRS
        .iter()
        .map(|(i, j)| format!("{}{}", i + 1, j + 1))
        .collect()
}

pub fn triple_labels() -> Vec<String> {
    TRIPLES
        .iter()
        .map(|(i, j, k)| format!("{}{}{}", i + 1, j + 1, k + 1))
        .collect()
}
