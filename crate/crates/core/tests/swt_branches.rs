//! Cross-checks of the analytic and numerical expansions against each other,
//! against exact diagonalization, and against the spectral fit.

use approx::assert_relative_eq;
use fluxcoupler::analysis::{evaluate, max_qubit_splitting, EvalOptions, Extraction};
use fluxcoupler::circuit::{derive_unitless, CircuitParams, PhysicalConstants, UnitlessParams};
use fluxcoupler::hamiltonian::diagonalize_coupler;
use fluxcoupler::operator::eigh;
use fluxcoupler::oscillator::{qubit_reduction, AnharmonicMode};
use fluxcoupler::swt::{
    analytic_couplings, c1, expand_fourth_order, j1_delta_form, j2_closed_form, j2_delta_form,
    j2_simplified, j3_delta_form, j4_delta_form, numerical_swt, Ladder, NumericalSwt,
    NumericalSwtInput, SwtPrefactors,
};
use nalgebra::{DMatrix, DVector};

fn reference(beta_c: f64) -> UnitlessParams<f64> {
    derive_unitless(
        &CircuitParams::reference_device(0.43),
        &PhysicalConstants::si(),
    )
    .map(|d| UnitlessParams { beta_c, ..d.params })
    .unwrap()
}

fn numerical(u: &UnitlessParams<f64>) -> NumericalSwt<f64> {
    let coupler = diagonalize_coupler(u, 40).unwrap();
    let s = std::array::from_fn(|j| qubit_reduction(u.xi[j], u.beta[j], u.alpha[j]).unwrap().s);
    numerical_swt(&NumericalSwtInput {
        coupler: &coupler,
        energy: u.e_l_tilde_c,
        alpha: u.alpha,
        s,
        phi_cx: u.phi_cx,
        keep: 20,
        qubit_energy_scale: max_qubit_splitting(u, 50),
    })
    .unwrap()
}

fn prefactors(u: &UnitlessParams<f64>) -> SwtPrefactors<f64> {
    let w = qubit_reduction(u.xi[0], u.beta[0], u.alpha[0]).unwrap();
    SwtPrefactors::new(u.e_l_tilde_c, u.xi_c, u.beta_c, u.alpha[0], w.s)
}

/// One qubit ⊗ coupler toy: ‖H_eff − exact‖ over ε.
fn toy_errors(eps: &[f64]) -> Vec<f64> {
    let mode = AnharmonicMode::coupler(0.1, 0.4, 0.3);
    let (n, keep) = (40, 20);
    let (e, v) = eigh(&mode.hamiltonian(n));
    let phi = v.transpose() * mode.phase_operator(n) * &v;
    let pc = phi.view((0, 0), (keep, keep)).into_owned();
    let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let en = DVector::from_fn(2 * keep, |k, _| e[k % keep]);
    let in_p: Vec<bool> = (0..2 * keep).map(|k| k % keep == 0).collect();
    eps.iter()
        .map(|&x| {
            let vmat = z.kronecker(&pc) * x;
            let h_eff = expand_fourth_order(&en, &vmat, &in_p, e[1] - e[0])
                .unwrap()
                .h_eff;
            let approx = eigh(&h_eff).0;
            let exact = eigh(&(DMatrix::from_diagonal(&en) + &vmat)).0;
            (approx[0] - exact[0])
                .abs()
                .max((approx[1] - exact[1]).abs())
        })
        .collect()
}

fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = (
        x.iter().map(|v| v.ln()).collect(),
        y.iter().map(|v| v.ln()).collect(),
    );
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

#[test]
fn toy_error_is_fifth_order() {
    let eps = [0.005, 0.01, 0.02, 0.05];
    let err = toy_errors(&eps);
    let slope = log_log_slope(&eps, &err);
    assert!((slope - 5.0).abs() <= 0.3, "slope {slope}");
    // Halving the coupling removes at least a factor 16 beyond fourth order.
    let pair = toy_errors(&[0.02, 0.01]);
    assert!(pair[0] / pair[1] >= 16.0);
}

#[test]
fn zero_nonlinearity_kills_odd_analytic_terms() {
    let u = reference(0.0);
    let w = qubit_reduction(u.xi[0], u.beta[0], u.alpha[0]).unwrap();
    let c = analytic_couplings(&u, &w).unwrap();
    assert_eq!(c.j3, 0.0);
    assert_eq!(c.j1, 0.0);
    let eps = u.alpha[0] * w.s;
    assert_relative_eq!(
        c.j4,
        3.0 * u.e_l_tilde_c * eps.powi(4) / u.xi_c,
        max_relative = 1e-12
    );
}

#[test]
fn zero_nonlinearity_numerical_j4_matches_analytic() {
    let u = reference(0.0);
    let w = qubit_reduction(u.xi[0], u.beta[0], u.alpha[0]).unwrap();
    let analytic = analytic_couplings(&u, &w).unwrap().j4;
    let numeric = numerical(&u).couplings.j4;
    assert!(
        (numeric - analytic).abs() <= 0.01 * analytic.abs(),
        "numerical J4 = {numeric:.6e} Hz, analytic J4 = {analytic:.6e} Hz"
    );
}

#[test]
fn harmonic_coupler_mediates_no_effective_coupling() {
    // A linearly driven harmonic coupler shifts each Z configuration by
    // −g²M²/Δ (M = ΣZ): no four-body term, and J2 = Eε² − 2g²/Δ, which
    // vanishes identically because 2g²/Δ = Eε² for the harmonic coupler.
    let u = reference(0.0);
    let n = numerical(&u);
    let p = prefactors(&u);
    let scale = p.g_qb_c * p.g_qb_c / p.delta10();
    assert!(n.couplings.j4.abs() < 1e-9 * scale);
    let w = qubit_reduction(u.xi[0], u.beta[0], u.alpha[0]).unwrap();
    let expected = j2_closed_form(u.e_l_tilde_c, u.xi_c, 0.0, u.alpha[0] * w.s);
    assert!((expected.direct + expected.g2).abs() < 1e-12 * expected.direct.abs());
    assert!(n.couplings.j2.abs() < 1e-9 * scale);
}

#[test]
fn numerical_expansion_parity_and_generators() {
    let n = numerical(&reference(0.43));
    let c = &n.couplings;
    let floor = c.j2.abs().min(c.j4.abs());
    assert!(
        c.j1.abs() <= 1e-3 * floor && c.j3.abs() <= 1e-3 * floor,
        "{c:?}"
    );
    assert!(n.decomposition.residual <= 1e-3 * c.j4.abs());
    for s in &n.generators {
        assert!((s + s.transpose()).amax() <= 1e-12 * s.amax());
    }
    assert!(n.h_eff.is_hermitian());
}

#[test]
fn delta_forms_against_closed_forms() {
    for beta in [0.1, 0.43, 0.6] {
        let u = reference(beta);
        let w = qubit_reduction(u.xi[0], u.beta[0], u.alpha[0]).unwrap();
        let p = prefactors(&u);
        let closed = analytic_couplings(&u, &w).unwrap();
        let (d, g, k) = (p.delta10(), p.g_qb_c, p.k_corr);

        assert_relative_eq!(j4_delta_form(&p), closed.j4, max_relative = 1e-12);
        assert_relative_eq!(
            j1_delta_form(&p, Ladder::Harmonic),
            closed.j1,
            max_relative = 1e-12
        );
        // The closed-form J3 carries (1−β_c)^3 where the Δ-form gives (1−β_c)^{13/4}.
        assert_relative_eq!(
            j3_delta_form(&p, Ladder::Harmonic) / closed.j3,
            (1.0 - beta).powf(-0.25),
            max_relative = 1e-12
        );

        let delta = j2_delta_form(&p, Ladder::Harmonic);
        let closed_j2 = j2_closed_form(u.e_l_tilde_c, u.xi_c, beta, p.epsilon);
        let simplified = j2_simplified(&p);
        assert_relative_eq!(delta.direct, closed_j2.direct, max_relative = 1e-12);
        assert_relative_eq!(delta.g2, closed_j2.g2, max_relative = 1e-12);
        assert_relative_eq!(delta.g4, closed_j2.g4, max_relative = 1e-12);
        assert_relative_eq!(delta.k_g2, closed_j2.k_g2, max_relative = 1e-12);
        // The simplified form's K·g² prefactor is smaller by 96.
        assert_relative_eq!(delta.k_g2 / simplified.k_g2, 96.0, max_relative = 1e-12);
        assert_relative_eq!(simplified.k2_g2, closed_j2.k2_g2, max_relative = 1e-12);
        // K²g² coefficient in units of K²g²/Δ³: 243.46 simplified, 247.10 from
        // the harmonic ladder, 552.88 from the shifted-by-one ladder.
        let coeff = |t: f64| t / (k * k * g * g / d.powi(3));
        assert_relative_eq!(
            coeff(simplified.k2_g2),
            2.0 * c1::<f64>() * 55296.0 / 24.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(coeff(simplified.k2_g2), 243.46, max_relative = 1e-4);
        assert_relative_eq!(coeff(delta.k2_g2), 247.10, max_relative = 1e-4);
        assert_relative_eq!(
            coeff(j2_delta_form(&p, Ladder::ShiftedByOne).k2_g2),
            552.88,
            max_relative = 1e-4
        );
    }
}

#[test]
fn analytic_j2_has_minimum_near_055() {
    let grid: Vec<f64> = (0..=60).map(|i| 0.3 + 0.01 * i as f64).collect();
    let j2: Vec<f64> = grid
        .iter()
        .map(|&b| {
            let u = reference(b);
            let w = qubit_reduction(u.xi[0], u.beta[0], u.alpha[0]).unwrap();
            analytic_couplings(&u, &w).unwrap().j2
        })
        .collect();
    let (i, _) = j2.iter().enumerate().fold(
        (0, f64::INFINITY),
        |a, (i, &v)| if v < a.1 { (i, v) } else { a },
    );
    assert!(i > 0 && i < grid.len() - 1, "no interior stationary point");
    assert!(
        (grid[i] - 0.55).abs() <= 0.1,
        "analytic J2 minimum at β_c = {}",
        grid[i]
    );
}

fn branch_rows(betas: &[f64]) -> Vec<fluxcoupler::analysis::SweepRow> {
    let o = EvalOptions::default();
    let k = PhysicalConstants::si();
    betas
        .iter()
        .map(|&b| {
            let p =
                fluxcoupler::analysis::with_beta_c(&CircuitParams::reference_device(0.43), b, &k)
                    .unwrap();
            evaluate(
                &derive_unitless(&p, &k).unwrap().params,
                Extraction::All,
                &o,
            )
        })
        .collect()
}

#[test]
fn small_nonlinearity_branches_agree_within_30_percent() {
    let r = &branch_rows(&[0.05])[0];
    let (s, a, n) = (
        r.spectral.as_ref().unwrap(),
        r.analytic.as_ref().unwrap(),
        r.numerical.as_ref().unwrap(),
    );
    for (name, vals) in [("J2", [s.j2, a.j2, n.j2]), ("J4", [s.j4, a.j4, n.j4])] {
        let hi = vals.iter().fold(f64::NEG_INFINITY, |x, &y| x.max(y));
        let lo = vals.iter().fold(f64::INFINITY, |x, &y| x.min(y));
        assert!(
            hi - lo <= 0.3 * hi.abs().max(lo.abs()),
            "{name}: spectral, analytic, numerical = {vals:?}"
        );
    }
}

#[test]
fn numerical_j4_grows_monotonically() {
    let rows = branch_rows(&[0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65]);
    let j4: Vec<f64> = rows
        .iter()
        .map(|r| r.numerical.as_ref().unwrap().j4)
        .collect();
    assert!(j4.windows(2).all(|w| w[1] > w[0]), "{j4:?}");
}

#[test]
fn numerical_j2_changes_sign() {
    let rows = branch_rows(&[0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65]);
    let j2: Vec<f64> = rows
        .iter()
        .map(|r| r.numerical.as_ref().unwrap().j2)
        .collect();
    assert!(
        j2.windows(2).any(|w| w[0].signum() != w[1].signum()),
        "{j2:?}"
    );
}
