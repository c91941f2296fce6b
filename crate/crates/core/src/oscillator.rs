//! Single-mode basis mathematics: ladder operators, Laguerre-based displacement
//! and cosine matrix elements, the double-well minimum and the shifted-oscillator
//! qubit reduction.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use thiserror::Error;

use crate::operator::{BasisTag, OperatorMatrix, Units};
use crate::scalar::{from_usize, lit, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OscillatorError {
    #[error("no double well: qubit regime violated (β/(1+α²) = {0} ≤ 1)")]
    NoDoubleWell(f64),
    #[error("vanishing barrier: 1 − ⟨0₋|0₊⟩² = {0:.3e}, projection factor s diverges")]
    VanishingBarrier(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// x = (a + a†)/√2.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderOps<T: Scalar> {
    pub dim: usize,
    pub a: DMatrix<T>,
    pub a_dag: DMatrix<T>,
    pub x: DMatrix<T>,
    pub convention: Quadrature,
}

impl<T: Scalar> LadderOps<T> {
    pub fn new(dim: usize) -> Self {
        let a = DMatrix::from_fn(dim, dim, |i, j| {
            if j == i + 1 {
                from_usize::<T>(j).sqrt()
            } else {
                T::zero()
            }
        });
        let a_dag = a.transpose();
        let x = (&a + &a_dag) * (T::one() / lit::<T>(2.0).sqrt());
        Self {
            dim,
            a,
            a_dag,
            x,
            convention: Quadrature::Symmetric,
        }
    }

    /// a + a†.
    pub fn quadrature_sum(&self) -> DMatrix<T> {
        &self.a + &self.a_dag
    }

    pub fn number(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_fn(self.dim, |i, _| {
            from_usize::<T>(i)
        }))
    }
}

pub fn ln_factorial<T: Scalar>(n: usize) -> T {
    (2..=n).fold(T::zero(), |acc, k| acc + from_usize::<T>(k).ln())
}

/// Generalized Laguerre polynomial L_n^(a)(x) by the three-term recurrence.
pub fn laguerre<T: Scalar>(n: usize, a: usize, x: T) -> T {
    let a_t = from_usize::<T>(a);
    let mut prev = T::one();
    if n == 0 {
        return prev;
    }
    let mut cur = T::one() + a_t - x;
    for k in 1..n {
        let k_t = from_usize::<T>(k);
        let next = ((lit::<T>(2.0) * k_t + T::one() + a_t - x) * cur - (k_t + a_t) * prev)
            / (k_t + T::one());
        prev = cur;
        cur = next;
    }
    cur
}

/// e^{−r²/2}·√(lo!/hi!)·r^{hi−lo}·L_lo^{(hi−lo)}(r²): the modulus part shared by
/// displacement-operator matrix elements ⟨m|D(α)|n⟩ with |α| = r.
fn displacement_magnitude<T: Scalar>(m: usize, n: usize, r: T) -> T {
    let (lo, hi) = if m <= n { (m, n) } else { (n, m) };
    let k = hi - lo;
    if r == T::zero() {
        return if k == 0 { T::one() } else { T::zero() };
    }
    let ln_pref = -r * r / lit(2.0)
        + (ln_factorial::<T>(lo) - ln_factorial::<T>(hi)) / lit(2.0)
        + from_usize::<T>(k) * r.ln();
    ln_pref.exp() * laguerre(lo, k, r * r)
}

/// Matrix of e^{i·r·(a + a†)} truncated to `n` number states.
pub fn displacement_matrix<T: Scalar>(n: usize, r: T) -> DMatrix<Complex<T>> {
    // D(ir): both orderings carry the phase (ir)^{|m−n|}.
    let phases = [
        Complex::new(T::one(), T::zero()),
        Complex::new(T::zero(), T::one()),
        Complex::new(-T::one(), T::zero()),
        Complex::new(T::zero(), -T::one()),
    ];
    DMatrix::from_fn(n, n, |m, k| {
        let mag = displacement_magnitude(m, k, r.abs());
        let p = m.abs_diff(k);
        let phase = if r < T::zero() && p % 2 == 1 {
            -phases[p % 4]
        } else {
            phases[p % 4]
        };
        phase * mag
    })
}

/// cos(r·(a + a†) + θ) in an `n`-state number basis, as the Hermitian average of
/// e^{iθ}·D and its adjoint.
pub fn cosine_matrix<T: Scalar>(n: usize, r: T, theta: T) -> OperatorMatrix<T> {
    let d = displacement_matrix(n, r);
    let e = Complex::new(theta.cos(), theta.sin());
    let plus = d.map(|z| z * e);
    let avg = (&plus + plus.adjoint()).map(|z| z.re / lit::<T>(2.0));
    OperatorMatrix::new(avg, BasisTag::Oscillator(n), Units::Dimensionless)
        .expect("cosine matrix is Hermitian")
}

/// sin(r·(a + a†) + θ), built the same way.
pub fn sine_matrix<T: Scalar>(n: usize, r: T, theta: T) -> DMatrix<T> {
    let d = displacement_matrix(n, r);
    let e = Complex::new(theta.cos(), theta.sin());
    let plus = d.map(|z| z * e);
    (&plus - plus.adjoint()).map(|z| z.im / lit::<T>(2.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellMinimum<T> {
    pub phi_p: T,
    pub double_well: bool,
}

/// Positive root of (1+α²)·φ = β·sin φ, or 0 when the potential has a single well.
pub fn find_well_minimum<T: Scalar>(beta: T, alpha: T) -> WellMinimum<T> {
    let k = T::one() + alpha * alpha;
    if beta <= k {
        return WellMinimum {
            phi_p: T::zero(),
            double_well: false,
        };
    }
    let f = |p: T| k * p - beta * p.sin();
    let df = |p: T| k - beta * p.cos();
    let (mut lo, mut hi) = (lit::<T>(1e-9), T::pi() - lit(1e-9));
    if f(lo) >= T::zero() {
        // Barrier too shallow to resolve inside the bracket.
        return WellMinimum {
            phi_p: T::zero(),
            double_well: false,
        };
    }
    while hi - lo > lit(1e-6) {
        let mid = (lo + hi) / lit(2.0);
        if f(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut p = (lo + hi) / lit(2.0);
    for _ in 0..50 {
        let step = f(p) / df(p);
        p -= step;
        if step.abs() <= T::default_epsilon() * p {
            break;
        }
    }
    WellMinimum {
        phi_p: p,
        double_well: true,
    }
}

/// How the well separation is converted into the argument of the overlap
/// formula. `Natural` measures the half-separation φ_p in units of the
/// effective well's zero-point length, d = √(2·m·ω)·φ_p; `RawPhase` feeds φ_p.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisplacementUnits {
    Natural,
    RawPhase,
}

pub const OVERLAP_DISPLACEMENT: DisplacementUnits = DisplacementUnits::Natural;

pub fn overlap_displacement<T: Scalar>(phi_p: T, m_eff: T, omega_eff: T) -> T {
    match OVERLAP_DISPLACEMENT {
        DisplacementUnits::Natural => (lit::<T>(2.0) * m_eff * omega_eff).sqrt() * phi_p,
        DisplacementUnits::RawPhase => phi_p,
    }
}

/// ⟨M₋|N₊⟩ between number states of harmonic wells centred at ∓φ_p, with `d` the
/// displacement argument; equals ⟨M|D(d)|N⟩, so ⟨M₋|N₊⟩ = (−1)^{M+N}⟨N₋|M₊⟩.
pub fn displaced_overlap<T: Scalar>(m: usize, n: usize, d: T) -> T {
    let mag = displacement_magnitude(m, n, d.abs());
    let flip = (m < n) != (d < T::zero());
    if flip && m.abs_diff(n) % 2 == 1 {
        -mag
    } else {
        mag
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellSolution<T> {
    pub phi_p: T,
    /// Effective well frequency in units of E_L.
    pub omega_eff: T,
    pub m_eff: T,
    pub overlap00: T,
    pub s: T,
    pub displacement: T,
}

/// Smallest 1 − ⟨0₋|0₊⟩² accepted before s is declared divergent.
pub const BARRIER_TOLERANCE: f64 = 1e-6;

/// Shifted-oscillator model of a double-well qubit: φ̂ ≈ s·Ẑ.
pub fn qubit_reduction<T: Scalar>(
    xi: T,
    beta: T,
    alpha: T,
) -> Result<WellSolution<T>, OscillatorError> {
    let k = T::one() + alpha * alpha;
    let ratio = beta / k;
    let WellMinimum { phi_p, double_well } = find_well_minimum(beta, alpha);
    if !double_well {
        return Err(OscillatorError::NoDoubleWell(
            ratio.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let m_eff = T::one() / (lit::<T>(4.0) * xi * xi);
    let curvature = k - beta * phi_p.cos();
    if curvature <= T::zero() {
        return Err(OscillatorError::VanishingBarrier(0.0));
    }
    let omega_eff = lit::<T>(2.0) * xi * curvature.sqrt();
    let displacement = overlap_displacement(phi_p, m_eff, omega_eff);
    let overlap00 = displaced_overlap(0, 0, displacement);
    let gap = T::one() - overlap00 * overlap00;
    if gap < lit(BARRIER_TOLERANCE) {
        return Err(OscillatorError::VanishingBarrier(
            gap.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let s = T::one() / (lit::<T>(2.0) * m_eff * omega_eff * gap).sqrt();
    Ok(WellSolution {
        phi_p,
        omega_eff,
        m_eff,
        overlap00,
        s,
        displacement,
    })
}

/// One phase mode H/E = 2ξ²q̂² + k(φ̂ − φ_x)²/2 + β·cos φ̂, represented in the
/// number basis of its quadratic part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnharmonicMode<T> {
    pub xi: T,
    pub quadratic: T,
    pub beta: T,
    pub offset: T,
}

impl<T: Scalar> AnharmonicMode<T> {
    pub fn qubit(xi: T, beta: T, alpha: T, offset: T) -> Self {
        Self {
            xi,
            quadratic: T::one() + alpha * alpha,
            beta,
            offset,
        }
    }

    pub fn coupler(xi: T, beta: T, offset: T) -> Self {
        Self {
            xi,
            quadratic: T::one(),
            beta,
            offset,
        }
    }

    /// ω₀ = 2ξ√k of the quadratic part.
    pub fn harmonic_frequency(&self) -> T {
        lit::<T>(2.0) * self.xi * self.quadratic.sqrt()
    }

    /// Zero-point scale r with φ̂ = r·(a + a†).
    pub fn phase_scale(&self) -> T {
        (self.xi / self.quadratic.sqrt()).sqrt()
    }

    pub fn phase_operator(&self, n: usize) -> DMatrix<T> {
        LadderOps::<T>::new(n).quadrature_sum() * self.phase_scale()
    }

    /// Dimensionless Hamiltonian matrix (multiply by the energy scale for Hz).
    pub fn hamiltonian(&self, n: usize) -> DMatrix<T> {
        let w0 = self.harmonic_frequency();
        let half = lit::<T>(0.5);
        let mut h = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| {
            w0 * (from_usize::<T>(i) + half)
        }));
        h -= self.phase_operator(n) * (self.quadratic * self.offset);
        for i in 0..n {
            h[(i, i)] += self.quadratic * self.offset * self.offset * half;
        }
        h += cosine_matrix(n, self.phase_scale(), T::zero()).data * self.beta;
        crate::operator::symmetrize(h)
    }

    pub fn lowest_gap(&self, n: usize) -> T {
        let mut e: Vec<T> = SymmetricEigen::new(self.hamiltonian(n))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        e.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        e[1] - e[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ladder_commutator_and_transpose() {
        let l = LadderOps::<f64>::new(12);
        assert_eq!(l.a_dag, l.a.transpose());
        let c = &l.a * &l.a_dag - &l.a_dag * &l.a;
        for i in 0..11 {
            for j in 0..11 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((c[(i, j)] - want).abs() < 1e-14);
            }
        }
        assert!((c[(11, 11)] - 1.0).abs() > 1.0);
    }

    #[test]
    fn well_minimum_cases() {
        assert_eq!(
            find_well_minimum(1.0, 0.0),
            WellMinimum {
                phi_p: 0.0,
                double_well: false
            }
        );
        // Plain bisection oracle on φ − 1.1·sin φ.
        let f = |p: f64| p - 1.1 * p.sin();
        let (mut lo, mut hi) = (0.1, 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let w = find_well_minimum(1.1, 0.0);
        assert!(w.double_well);
        assert_relative_eq!(w.phi_p, lo, max_relative = 1e-13);
        assert!((w.phi_p - 0.748).abs() < 1e-3);
        assert!(f(w.phi_p).abs() < 1e-12);

        let mut last = w.phi_p;
        for alpha in [0.01, 0.03, 0.049, 0.1] {
            let p = find_well_minimum(1.1, alpha).phi_p;
            assert!(p < last);
            assert!(((1.0 + alpha * alpha) * p - 1.1 * p.sin()).abs() < 1e-12);
            last = p;
        }
    }

    #[test]
    fn overlap_limits() {
        for m in 0..6 {
            for n in 0..6 {
                assert_eq!(displaced_overlap(m, n, 0.0), if m == n { 1.0 } else { 0.0 });
            }
        }
        for d in [0.1, 0.7, 2.3] {
            assert_relative_eq!(
                displaced_overlap(0, 0, d),
                (-d * d / 2.0f64).exp(),
                max_relative = 1e-15
            );
        }
        assert!(displaced_overlap(60, 0, 1.5f64).is_finite());
        assert!(displaced_overlap(60, 59, 1.5f64).is_finite());
        let d = 1.3;
        for (m, n) in [(3, 1), (2, 5), (4, 4)] {
            let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(
                displaced_overlap(m, n, d),
                sign * displaced_overlap(n, m, d),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn reference_qubit_reduction() {
        let alpha = 40.0 / 817.0;
        let w = qubit_reduction(0.05f64, 1.1, alpha).unwrap();
        assert_relative_eq!(w.m_eff, 100.0, max_relative = 1e-14);
        assert!((w.omega_eff - 0.0443).abs() < 0.002, "ω = {}", w.omega_eff);
        // ω² = V''(φ_p)/m with V = (1+α²)φ²/2 + β cos φ; finite-difference check.
        let v = |p: f64| (1.0 + alpha * alpha) * p * p / 2.0 + 1.1 * p.cos();
        let h = 1e-4;
        let curv = (v(w.phi_p + h) - 2.0 * v(w.phi_p) + v(w.phi_p - h)) / (h * h);
        assert_relative_eq!(w.omega_eff, (curv / w.m_eff).sqrt(), max_relative = 1e-6);
        let exact_s = 1.0 / (2.0 * w.m_eff * w.omega_eff * (1.0 - w.overlap00.powi(2))).sqrt();
        assert_eq!(w.s, exact_s);
        assert!(w.overlap00 > 0.0 && w.overlap00 < 1.0);
    }

    #[test]
    fn orthogonal_well_limit() {
        // Deep wells: the overlap vanishes and s reduces to the zero-point length.
        let w = qubit_reduction(0.01f64, 3.0, 0.0).unwrap();
        assert!(w.overlap00 < 1e-12);
        assert_relative_eq!(
            w.s,
            1.0 / (2.0 * w.m_eff * w.omega_eff).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn vanishing_barrier_detected() {
        assert!(matches!(
            qubit_reduction(0.05, 0.95, 0.0),
            Err(OscillatorError::NoDoubleWell(_))
        ));
        assert!(matches!(
            qubit_reduction(0.05, 1.0 + 1e-7, 0.0),
            Err(OscillatorError::VanishingBarrier(_))
        ));
        let mut last = 0.0;
        for eps in [1e-1, 1e-2, 1e-3] {
            let s = qubit_reduction(0.05, 1.0 + eps, 0.0).unwrap().s;
            assert!(s > last);
            last = s;
        }
    }

    #[test]
    fn cosine_identity_limit() {
        let c = cosine_matrix::<f64>(20, 1e-9, 0.0).data;
        assert!((c - DMatrix::identity(20, 20)).amax() < 1e-15);
    }

    #[test]
    fn cosine_ground_matches_series() {
        // Σ_k (−1)^k r^{2k} (2k−1)!!/(2k)!.
        for r in [0.05, 0.22, 0.8, 1.5] {
            let mut term = 1.0;
            let mut sum = 1.0;
            for k in 1..60 {
                let kf = k as f64;
                term *= -r * r * (2.0 * kf - 1.0) / ((2.0 * kf - 1.0) * (2.0 * kf));
                sum += term;
            }
            let c = cosine_matrix(40, r, 0.0).data;
            assert_relative_eq!(c[(0, 0)], sum, max_relative = 1e-13);
            assert_relative_eq!(c[(0, 0)], (-r * r / 2.0f64).exp(), max_relative = 1e-13);
        }
    }

    #[test]
    fn cosine_truncation_blocks_agree() {
        let a = cosine_matrix(40, 0.22, 0.0).data;
        let b = cosine_matrix(50, 0.22, 0.0).data;
        let diff = a.view((0, 0), (30, 30)) - b.view((0, 0), (30, 30));
        assert!(diff.amax() < 1e-10);
    }

    #[test]
    fn cosine_parity_and_symmetry() {
        let c = cosine_matrix(40, 0.3f64, 0.0);
        assert_eq!(c.data, c.data.transpose());
        for i in 0..40 {
            for j in 0..40 {
                if (i + j) % 2 == 1 {
                    assert!(c.data[(i, j)].abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn shifted_cosine_matches_angle_sum() {
        let (r, th) = (0.3f64, 0.37f64);
        let c = cosine_matrix(30, r, th).data;
        let want = cosine_matrix(30, r, 0.0).data * th.cos() - sine_matrix(30, r, 0.0) * th.sin();
        assert!((c - want).amax() < 1e-14);
    }

    #[test]
    fn f32_smoke() {
        let w = qubit_reduction(0.05f32, 1.1, 0.049).unwrap();
        assert!((w.phi_p - 0.74).abs() < 0.02);
        let c = cosine_matrix(20, 0.2f32, 0.0).data;
        assert!((c[(0, 0)] - (-0.02f32).exp()).abs() < 1e-6);
    }
}
