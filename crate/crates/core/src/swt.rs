//! Fourth-order Schrieffer–Wolff reduction onto the coupler ground state:
//! closed-form couplings for a quartic coupler, and the same expansion carried
//! out numerically in the exact coupler eigenbasis.

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use thiserror::Error;

use crate::circuit::UnitlessParams;
use crate::hamiltonian::CouplerEigensystem;
use crate::operator::{commutator, embed_qubit, symmetrize, BasisTag, OperatorMatrix, Units};
use crate::oscillator::WellSolution;
use crate::pauli::{self, inner, N_QUBITS, PAIRS, TRIPLES};
use crate::scalar::{from_usize, lit, to_f64, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwtError {
    #[error("coupler screening β_c = {0} ≥ 1: couplings diverge")]
    Divergent(f64),
    #[error("closed forms assume identical qubits")]
    NonIdenticalQubits,
    #[error("degenerate energies across the block partition at ({row}, {col}): |ΔE| = {gap:.3e}")]
    DegenerateBlocks { row: usize, col: usize, gap: f64 },
    #[error("coupler gap {gap:.6e} Hz does not exceed the qubit energy scale {scale:.6e} Hz: expansion not convergent")]
    GapCollapse { gap: f64, scale: f64 },
    #[error("need {need} coupler eigenstates, only {have} available")]
    Truncation { need: usize, have: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    SpectralFit,
    AnalyticSwt,
    NumericalSwt,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::SpectralFit => "spectral_fit",
            Provenance::AnalyticSwt => "analytic_swt",
            Provenance::NumericalSwt => "numerical_swt",
        }
    }
}

/// Uniform Ising coefficients (Hz) for H = shift + J1 ΣẐ + J2 Σ_{i<j} ẐẐ + J3 Σ_{i<j<k} ẐẐẐ + J4 ẐẐẐẐ.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingStrengths<T> {
    pub j1: T,
    pub j2: T,
    pub j3: T,
    pub j4: T,
    pub shift: T,
    pub provenance: Provenance,
    /// Max − min over qubits, pairs and triples for J1, J2, J3.
    pub spread: [T; 3],
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwtCoefficients {
    pub b1: Ratio<i64>,
    pub b3: Ratio<i64>,
    pub a2: Ratio<i64>,
}

/// Bernoulli numbers B_0..=B_n (B_1 = −1/2).
pub fn bernoulli(n: usize) -> Vec<Ratio<i64>> {
    let mut b = vec![Ratio::from_integer(1)];
    for m in 1..=n {
        let mut acc = Ratio::from_integer(0);
        let mut binom: i64 = 1;
        for (k, bk) in b.iter().enumerate() {
            acc += *bk * binom;
            binom = binom * (m as i64 + 1 - k as i64) / (k as i64 + 1);
        }
        b.push(-acc / (m as i64 + 1));
    }
    b
}

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

impl SwtCoefficients {
    /// b_{2n−1} = 2(2^{2n} − 1)B_{2n}/(2n)!, a_n = 2ⁿBₙ/n!.
    pub fn from_bernoulli() -> Self {
        let b = bernoulli(4);
        let odd = |n: usize| b[2 * n] * (2 * ((1i64 << (2 * n)) - 1)) / factorial(2 * n);
        Self {
            b1: odd(1),
            b3: odd(2),
            a2: b[2] * (1i64 << 2) / factorial(2),
        }
    }

    fn as_scalars<T: Scalar>(&self) -> (T, T, T) {
        let f = |r: Ratio<i64>| lit::<T>(*r.numer() as f64) / lit::<T>(*r.denom() as f64);
        (f(self.b1), f(self.b3), f(self.a2))
    }
}

/// Vertices of the quartic-coupler expansion, all in Hz except m_c, ω_c (in
/// E_L̃c units) and ε.
#[derive(Debug, Clone, PartialEq)]
pub struct SwtPrefactors<T> {
    pub g_qb_c: T,
    pub g_qb_qb: T,
    pub k_corr: T,
    pub m_c: T,
    pub omega_c: T,
    pub epsilon: T,
    /// Δ_n0 = n·Δ_10 for n = 0..=8.
    pub delta: Vec<T>,
}

impl<T: Scalar> SwtPrefactors<T> {
    /// g = E·α·s·x₀ with x₀ = (2m_cω_c)^{−1/2} the coupler zero-point phase,
    /// K = E·β_c·x₀⁴/24, Δ_10 = E·ω_c.
    pub fn new(e: T, xi_c: T, beta_c: T, alpha: T, s: T) -> Self {
        let m_c = T::one() / (lit::<T>(4.0) * xi_c * xi_c);
        let omega_c = lit::<T>(2.0) * xi_c * (T::one() - beta_c).sqrt();
        let x0_sq = T::one() / (lit::<T>(2.0) * m_c * omega_c);
        let epsilon = alpha * s;
        let d10 = e * omega_c;
        Self {
            g_qb_c: e * epsilon * x0_sq.sqrt(),
            g_qb_qb: e * epsilon * epsilon,
            k_corr: e * beta_c * x0_sq * x0_sq / lit(24.0),
            m_c,
            omega_c,
            epsilon,
            delta: (0..=8).map(|n| from_usize::<T>(n) * d10).collect(),
        }
    }

    pub fn delta10(&self) -> T {
        self.delta[1]
    }
}

/// Which excitation ladder is substituted into the Δ-form expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    /// Δ_n0 = n·Δ_10 (harmonic spectrum).
    Harmonic,
    /// Δ_n0 = (n−1)·Δ_10 for n ≥ 2, Δ_10 unchanged.
    ShiftedByOne,
}

fn ladder_delta<T: Scalar>(p: &SwtPrefactors<T>, ladder: Ladder, n: usize) -> T {
    match ladder {
        Ladder::Harmonic => p.delta[n],
        Ladder::ShiftedByOne if n <= 1 => p.delta[1],
        Ladder::ShiftedByOne => from_usize::<T>(n - 1) * p.delta[1],
    }
}

/// J2 split by vertex content; `total()` = J2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct J2Terms<T> {
    pub direct: T,
    pub g2: T,
    pub k_g2: T,
    pub k2_g2: T,
    pub g4: T,
}

impl<T: Scalar> J2Terms<T> {
    pub fn total(&self) -> T {
        self.direct + self.g2 + self.k_g2 + self.k2_g2 + self.g4
    }
}

/// J4 = 24g⁴/Δ_10³.
pub fn j4_delta_form<T: Scalar>(p: &SwtPrefactors<T>) -> T {
    lit::<T>(24.0) * p.g_qb_c.powi(4) / p.delta10().powi(3)
}

/// J3 = −6·2K g³/(Δ_20 Δ_10²).
pub fn j3_delta_form<T: Scalar>(p: &SwtPrefactors<T>, ladder: Ladder) -> T {
    let d = |n| ladder_delta(p, ladder, n);
    -lit::<T>(12.0) * p.k_corr * p.g_qb_c.powi(3) / (d(2) * d(1) * d(1))
}

/// The unsimplified J2 expression. Terms printed with a single power of g are
/// dimensionally inconsistent with their neighbours and are read as g².
pub fn j2_delta_form<T: Scalar>(p: &SwtPrefactors<T>, ladder: Ladder) -> J2Terms<T> {
    let d = |n| ladder_delta(p, ladder, n);
    let (s2, s6, s8) = (
        lit::<T>(2.0).sqrt(),
        lit::<T>(6.0).sqrt(),
        lit::<T>(8.0).sqrt(),
    );
    let l = |x: f64| lit::<T>(x);
    let g2 = p.g_qb_c * p.g_qb_c;
    let k = p.k_corr;
    let half_k = l(12.0) / (d(2) * d(1)) + l(12.0) / (d(1) * d(2)) + l(12.0) / (d(1) * d(1));
    let den = |a: usize, b: usize, c: usize| d(a) * d(b) * d(c);
    let terms: [(T, (usize, usize, usize)); 33] = [
        (-l(10.0) * s6, (5, 4, 4)),
        (-l(10.0) * s6, (5, 4, 1)),
        (-l(12.0) * s6, (4, 3, 2)),
        (-l(18.0) * s2, (3, 3, 2)),
        (-l(20.0) * s6, (4, 3, 1)),
        (-l(30.0) * s2, (3, 3, 1)),
        (-l(8.0) * s6, (4, 2, 1)),
        (-l(12.0) * s2, (2, 2, 2)),
        (-l(12.0) * s2, (2, 1, 1)),
        (-l(28.0) * s8, (4, 2, 1)),
        (-l(36.0) * s2, (2, 2, 1)),
        (l(8.0), (4, 1, 1)),
        (l(24.0), (2, 2, 2)),
        (l(8.0), (4, 4, 1)),
        (l(16.0), (1, 1, 1)),
        (l(48.0), (2, 2, 2)),
        (l(48.0), (2, 1, 1)),
        (l(48.0), (2, 2, 1)),
        (l(144.0) * s2, (1, 1, 2)),
        (l(24.0), (1, 2, 2)),
        (l(48.0), (4, 1, 2)),
        (l(24.0), (1, 2, 2)),
        (l(24.0), (1, 1, 2)),
        (-l(2.0), (4, 1, 1)),
        (-l(6.0), (1, 1, 2)),
        (-l(2.0), (1, 4, 4)),
        (-l(4.0), (1, 1, 4)),
        (-l(6.0), (1, 2, 2)),
        (-l(12.0), (1, 1, 2)),
        (-l(12.0), (1, 1, 2)),
        (-l(6.0), (1, 1, 2)),
        (-l(6.0), (1, 2, 2)),
        (-l(2.0), (1, 2, 2)),
    ];
    let k2 = terms
        .iter()
        .fold(T::zero(), |acc, &(c, (a, b, cc))| acc + c / den(a, b, cc));
    let two = l(2.0);
    J2Terms {
        direct: p.g_qb_qb,
        g2: -two * g2 / d(1),
        k_g2: two * half_k * k * g2,
        k2_g2: two * k2 * k * k * g2,
        g4: two * l(20.0) * g2 * g2 / d(1).powi(3),
    }
}

/// The unsimplified J1 expression.
pub fn j1_delta_form<T: Scalar>(p: &SwtPrefactors<T>, ladder: Ladder) -> T {
    let d = |n| ladder_delta(p, ladder, n);
    let s3 = lit::<T>(3.0).sqrt();
    let l = |x: f64| lit::<T>(x);
    let k3g = p.k_corr.powi(3) * p.g_qb_c;
    let sum = l(72.0) * s3 / (d(2) * d(2) * d(1))
        + l(432.0) / (d(2) * d(2) * d(1))
        + l(120.0) * s3 / (d(5) * d(4) * d(1))
        + l(120.0) / (d(5) * d(1) * d(1))
        + l(240.0) / (d(3) * d(4) * d(1))
        + l(360.0) / (d(3) * d(2) * d(1))
        + l(600.0) / (d(3) * d(1) * d(1))
        + l(144.0) / (d(2) * d(1) * d(1))
        + l(144.0) / d(1).powi(3);
    -sum * k3g - l(12.0) * p.k_corr * p.g_qb_c.powi(3) / d(1).powi(3)
}

/// Constant c₁ of the closed-form J2.
pub fn c1<T: Scalar>() -> T {
    let n = lit::<T>(1689.0) + lit::<T>(1060.0) * lit::<T>(2.0).sqrt()
        - lit::<T>(82.0) * lit::<T>(6.0).sqrt()
        - lit::<T>(12.0) * lit::<T>(30.0).sqrt();
    n / lit(55296.0)
}

/// J2 in the simplified Δ_10 form, split the same way as `j2_delta_form`.
pub fn j2_simplified<T: Scalar>(p: &SwtPrefactors<T>) -> J2Terms<T> {
    let d = p.delta10();
    let g2 = p.g_qb_c * p.g_qb_c;
    let x = c1::<T>() * lit(55296.0 / 24.0);
    let two = lit::<T>(2.0);
    J2Terms {
        direct: p.g_qb_qb,
        g2: -two * g2 / d,
        k_g2: two * p.k_corr / (lit::<T>(4.0) * d) * g2 / d,
        k2_g2: two * x * p.k_corr * p.k_corr / (d * d) * g2 / d,
        g4: lit::<T>(40.0) * g2 * g2 / d.powi(3),
    }
}

/// J2 closed form in circuit parameters, split like `J2Terms`.
pub fn j2_closed_form<T: Scalar>(e: T, xi: T, beta: T, eps: T) -> J2Terms<T> {
    let b1 = T::one() - beta;
    let pre = e * eps * eps;
    J2Terms {
        direct: pre,
        g2: -pre / b1,
        k_g2: pre * beta * xi / (lit::<T>(2.0) * b1.powf(lit(2.5))),
        k2_g2: pre * c1::<T>() * beta * beta * xi * xi / b1.powi(4),
        g4: pre * lit::<T>(5.0) * eps * eps / (xi * b1.powf(lit(2.5))),
    }
}

/// Ratio 4g/Δ_10 above which the expansion is flagged as poorly convergent.
pub const CONVERGENCE_RATIO: f64 = 0.5;

pub fn analytic_couplings<T: Scalar>(
    u: &UnitlessParams<T>,
    w: &WellSolution<T>,
) -> Result<CouplingStrengths<T>, SwtError> {
    if u.beta_c >= T::one() {
        return Err(SwtError::Divergent(to_f64(u.beta_c)));
    }
    if !u.qubits_identical(lit(1e-9)) {
        return Err(SwtError::NonIdenticalQubits);
    }
    let (e, xi, beta) = (u.e_l_tilde_c, u.xi_c, u.beta_c);
    let eps = u.alpha[0] * w.s;
    let b1 = T::one() - beta;
    let p = SwtPrefactors::new(e, xi, beta, u.alpha[0], w.s);
    let d = p.delta10();
    let j4 = lit::<T>(3.0) * e * eps.powi(4) / (xi * b1.powf(lit(2.5)));
    let j3 = -e * eps.powi(3) * beta * xi.sqrt() / (lit::<T>(32.0) * b1.powi(3));
    let j2 = j2_closed_form(e, xi, beta, eps).total();
    let j1 =
        -(lit::<T>(628.0) + lit::<T>(24.0) * lit::<T>(3.0).sqrt()) * p.k_corr.powi(3) * p.g_qb_c
            / d.powi(3)
            - lit::<T>(12.0) * p.k_corr * p.g_qb_c.powi(3) / d.powi(3);
    let mut warnings = Vec::new();
    let ratio = lit::<T>(4.0) * p.g_qb_c / d;
    if ratio > lit(CONVERGENCE_RATIO) {
        warnings.push(format!(
            "4g/Δ10 = {:.3}: expansion near its convergence limit",
            to_f64(ratio)
        ));
    }
    Ok(CouplingStrengths {
        j1,
        j2,
        j3,
        j4,
        shift: T::zero(),
        provenance: Provenance::AnalyticSwt,
        spread: [T::zero(); 3],
        warnings,
    })
}

/// L(X)_ij = X_ij/(E_i − E_j) for i, j in different blocks, zero inside blocks.
pub fn linear_map_l<T: Scalar>(
    x: &DMatrix<T>,
    energies: &DVector<T>,
    in_p: &[bool],
    energy_scale: T,
) -> Result<DMatrix<T>, SwtError> {
    let n = x.nrows();
    let mut out = DMatrix::zeros(n, n);
    let guard = lit::<T>(1e-12) * energy_scale;
    for i in 0..n {
        for j in 0..n {
            if in_p[i] == in_p[j] || x[(i, j)] == T::zero() {
                continue;
            }
            let gap = energies[i] - energies[j];
            if gap.abs() < guard {
                return Err(SwtError::DegenerateBlocks {
                    row: i,
                    col: j,
                    gap: to_f64(gap.abs()),
                });
            }
            out[(i, j)] = x[(i, j)] / gap;
        }
    }
    Ok(out)
}

fn block_split<T: Scalar>(v: &DMatrix<T>, in_p: &[bool]) -> (DMatrix<T>, DMatrix<T>) {
    let mut diag = v.clone();
    let mut off = DMatrix::zeros(v.nrows(), v.ncols());
    for i in 0..v.nrows() {
        for j in 0..v.ncols() {
            if in_p[i] != in_p[j] {
                off[(i, j)] = v[(i, j)];
                diag[(i, j)] = T::zero();
            }
        }
    }
    (diag, off)
}

/// Generators and effective Hamiltonian of one expansion.
#[derive(Debug, Clone)]
pub struct SwtExpansion<T: Scalar> {
    /// P₀-block of the effective Hamiltonian (rows/cols in `in_p` order).
    pub h_eff: DMatrix<T>,
    pub generators: [DMatrix<T>; 3],
}

/// Fourth-order expansion of H₀ + V with H₀ = diag(`energies`) onto the block
/// marked by `in_p`.
pub fn expand_fourth_order<T: Scalar>(
    energies: &DVector<T>,
    v: &DMatrix<T>,
    in_p: &[bool],
    energy_scale: T,
) -> Result<SwtExpansion<T>, SwtError> {
    let (b1, b3, a2) = SwtCoefficients::from_bernoulli().as_scalars::<T>();
    let (v_d, v_od) = block_split(v, in_p);
    let s1 = linear_map_l(&v_od, energies, in_p, energy_scale)?;
    let s2 = -linear_map_l(&commutator(&v_d, &s1), energies, in_p, energy_scale)?;
    let c11 = commutator(&s1, &commutator(&s1, &v_od));
    let s3 = -linear_map_l(&commutator(&v_d, &s2), energies, in_p, energy_scale)?
        + linear_map_l(&c11, energies, in_p, energy_scale)? * a2;
    let full = DMatrix::from_diagonal(energies)
        + v
        + (commutator(&s1, &v_od) + commutator(&s2, &v_od) + commutator(&s3, &v_od)) * b1
        + commutator(&s1, &c11) * b3;
    let idx: Vec<usize> = (0..in_p.len()).filter(|&i| in_p[i]).collect();
    let h_eff = symmetrize(DMatrix::from_fn(idx.len(), idx.len(), |a, b| {
        full[(idx[a], idx[b])]
    }));
    Ok(SwtExpansion {
        h_eff,
        generators: [s1, s2, s3],
    })
}

/// Linear least-squares split of a four-qubit operator into 𝟙, every Z-string
/// (in the given per-qubit frames) and, optionally, extra operators.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliDecomposition<T> {
    pub identity: T,
    pub j1: [T; 4],
    pub j2: [T; 6],
    pub j3: [T; 4],
    pub j4: T,
    pub extra: Vec<T>,
    /// ‖remainder‖_F/4: the coefficient norm of everything not captured.
    pub residual: T,
}

impl<T: Scalar> PauliDecomposition<T> {
    pub fn strengths(&self, provenance: Provenance) -> CouplingStrengths<T> {
        fn mean_spread<T: Scalar>(xs: &[T]) -> (T, T) {
            let n = from_usize::<T>(xs.len());
            let mean = xs.iter().fold(T::zero(), |a, &b| a + b) / n;
            let hi = xs.iter().fold(xs[0], |a, &b| a.max(b));
            let lo = xs.iter().fold(xs[0], |a, &b| a.min(b));
            (mean, hi - lo)
        }
        let (j1, s1) = mean_spread(&self.j1);
        let (j2, s2) = mean_spread(&self.j2);
        let (j3, s3) = mean_spread(&self.j3);
        CouplingStrengths {
            j1,
            j2,
            j3,
            j4: self.j4,
            shift: self.identity,
            provenance,
            spread: [s1, s2, s3],
            warnings: Vec::new(),
        }
    }
}

fn mask_order() -> Vec<u8> {
    let mut masks = vec![0u8];
    masks.extend((0..4).map(|j| 1u8 << j));
    masks.extend(PAIRS.iter().map(|&(i, j)| pauli::pair_mask(i, j)));
    masks.extend(TRIPLES.iter().map(|&(i, j, k)| pauli::triple_mask(i, j, k)));
    masks.push(pauli::ALL_MASK);
    masks
}

pub fn pauli_decompose_with<T: Scalar>(
    h: &DMatrix<T>,
    frames: &[DMatrix<T>; N_QUBITS],
    extra: &[DMatrix<T>],
) -> PauliDecomposition<T> {
    let mut basis: Vec<DMatrix<T>> = mask_order()
        .into_iter()
        .map(|m| pauli::z_string(m, frames))
        .collect();
    basis.extend(extra.iter().cloned());
    let nb = basis.len();
    let gram = DMatrix::from_fn(nb, nb, |a, b| inner(&basis[a], &basis[b]));
    let rhs = DVector::from_fn(nb, |a, _| inner(&basis[a], h));
    let coef = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.pseudo_inverse(lit(1e-12)).ok().map(|p| p * &rhs))
        .expect("Gram matrix of the operator basis is invertible");
    let mut rem = h.clone();
    for (c, b) in coef.iter().zip(&basis) {
        rem -= b * *c;
    }
    PauliDecomposition {
        identity: coef[0],
        j1: std::array::from_fn(|k| coef[1 + k]),
        j2: std::array::from_fn(|k| coef[5 + k]),
        j3: std::array::from_fn(|k| coef[11 + k]),
        j4: coef[15],
        extra: coef.iter().skip(16).copied().collect(),
        residual: rem.norm() / lit(4.0),
    }
}

/// Z-string coefficients Tr(P_S·h)/16 in the computational basis.
pub fn pauli_decompose<T: Scalar>(h: &DMatrix<T>) -> PauliDecomposition<T> {
    pauli_decompose_with(h, &std::array::from_fn(|_| pauli::sigma_z()), &[])
}

/// Inputs of the numerical expansion: four degenerate qubits φ̂_j → s_j·Ẑ_j
/// coupled to the exactly diagonalized coupler.
#[derive(Debug, Clone)]
pub struct NumericalSwtInput<'a, T: Scalar> {
    pub coupler: &'a CouplerEigensystem<T>,
    pub energy: T,
    pub alpha: [T; 4],
    pub s: [T; 4],
    pub phi_cx: T,
    /// Coupler eigenstates carried through the expansion.
    pub keep: usize,
    /// Largest qubit energy (Hz) the coupler gap must exceed.
    pub qubit_energy_scale: T,
}

#[derive(Debug, Clone)]
pub struct NumericalSwt<T: Scalar> {
    pub h_eff: OperatorMatrix<T>,
    pub decomposition: PauliDecomposition<T>,
    pub couplings: CouplingStrengths<T>,
    pub generators: [DMatrix<T>; 3],
    /// max|V_od| row sum over the coupler gap.
    pub perturbation_ratio: T,
}

pub fn numerical_swt<T: Scalar>(
    inp: &NumericalSwtInput<'_, T>,
) -> Result<NumericalSwt<T>, SwtError> {
    let nc = inp.keep;
    if nc < 2 || nc > inp.coupler.energies.len() {
        return Err(SwtError::Truncation {
            need: nc,
            have: inp.coupler.energies.len(),
        });
    }
    let gap = inp.coupler.gap();
    if gap <= inp.qubit_energy_scale {
        return Err(SwtError::GapCollapse {
            gap: to_f64(gap),
            scale: to_f64(inp.qubit_energy_scale),
        });
    }
    let e = inp.energy;
    let zs: Vec<DMatrix<T>> = (0..N_QUBITS)
        .map(|j| embed_qubit(&pauli::sigma_z(), j, N_QUBITS))
        .collect();
    let mut direct = DMatrix::<T>::zeros(16, 16);
    for &(i, j) in PAIRS.iter() {
        direct += &zs[i] * &zs[j] * (inp.alpha[i] * inp.alpha[j] * inp.s[i] * inp.s[j]);
    }
    let mut linear = DMatrix::<T>::zeros(16, 16);
    for j in 0..N_QUBITS {
        linear += &zs[j] * (inp.alpha[j] * inp.s[j]);
    }
    let phic = inp.coupler.phase.view((0, 0), (nc, nc)).into_owned();
    let id_c = DMatrix::<T>::identity(nc, nc);
    let v = ((direct - &linear * inp.phi_cx).kronecker(&id_c) + linear.kronecker(&phic)) * e;
    let ec = inp.coupler.energies.rows(0, nc).into_owned();
    let energies = DVector::from_fn(16 * nc, |k, _| ec[k % nc]);
    let in_p: Vec<bool> = (0..16 * nc).map(|k| k % nc == 0).collect();

    let (_, v_od) = block_split(&v, &in_p);
    let row_max = (0..v_od.nrows())
        .map(|i| v_od.row(i).iter().fold(T::zero(), |a, &b| a + b.abs()))
        .fold(T::zero(), |a, b| a.max(b));

    let exp = expand_fourth_order(&energies, &v, &in_p, gap)?;
    let decomposition = pauli_decompose(&exp.h_eff);
    let mut couplings = decomposition.strengths(Provenance::NumericalSwt);
    let perturbation_ratio = row_max / gap;
    if perturbation_ratio > lit(CONVERGENCE_RATIO) {
        couplings.warnings.push(format!(
            "‖V_od‖/Δ10 = {:.3}: expansion near its convergence limit",
            to_f64(perturbation_ratio)
        ));
    }
    let h_eff = OperatorMatrix::new(exp.h_eff, BasisTag::four_qubits(), Units::Hz)
        .expect("effective Hamiltonian is Hermitian");
    Ok(NumericalSwt {
        h_eff,
        decomposition,
        couplings,
        generators: exp.generators,
        perturbation_ratio,
    })
}
