//! Full-circuit behaviour: truncation convergence, ground-manifold isolation,
//! flux symmetry, finite-difference stability and degeneracy patterns.

use approx::assert_relative_eq;
use fluxcoupler::analysis::{
    gap_scan, susceptibility_at, sweep_flux, EvalOptions, FluxMode, OperatingPoint,
    SusceptibilityParameter, SweepConfig,
};
use fluxcoupler::circuit::{derive_unitless, CircuitParams, PhysicalConstants, UnitlessParams};
use fluxcoupler::hamiltonian::{assemble_ising_model, CircuitModel, IsingModel, Truncation};
use fluxcoupler::spectrum::{
    eigendecompose, gap_diagnostics, two_excitation_splitting, DEFAULT_GAP_THRESHOLD,
};

fn reference(beta_c: f64) -> UnitlessParams<f64> {
    derive_unitless(
        &CircuitParams::reference_device(beta_c),
        &PhysicalConstants::si(),
    )
    .unwrap()
    .params
}

fn lowest16(u: &UnitlessParams<f64>, t: Truncation) -> Vec<f64> {
    let m = CircuitModel::build(u, t).unwrap();
    eigendecompose(&m.hamiltonian)
        .unwrap()
        .eigenvalues
        .iter()
        .take(16)
        .copied()
        .collect()
}

/// Largest per-level relative change of the lowest 16 eigenvalues.
fn truncation_change(beta_c: f64, t: Truncation) -> f64 {
    let u = reference(beta_c);
    let a = lowest16(&u, Truncation::default());
    let b = lowest16(&u, t);
    a.iter()
        .zip(&b)
        .map(|(x, y)| ((x - y) / x).abs())
        .fold(0.0, f64::max)
}

const BETAS: [f64; 3] = [0.05, 0.2, 0.43];

#[test]
fn converged_in_coupler_states() {
    for b in BETAS {
        let d = truncation_change(
            b,
            Truncation {
                coupler_states: 50,
                ..Default::default()
            },
        );
        assert!(d <= 1e-7, "β_c = {b}: {d:e}");
    }
}

#[test]
fn converged_in_qubit_states() {
    for b in BETAS {
        let d = truncation_change(
            b,
            Truncation {
                qubit_states: 60,
                ..Default::default()
            },
        );
        assert!(d <= 1e-7, "β_c = {b}: {d:e}");
    }
}

#[test]
fn converged_in_kept_coupler_levels() {
    for b in BETAS {
        let d = truncation_change(
            b,
            Truncation {
                coupler_keep: 16,
                ..Default::default()
            },
        );
        assert!(d <= 1e-7, "β_c = {b}: {d:e}");
    }
}

fn cfg(grid: Vec<f64>) -> SweepConfig {
    SweepConfig::new(CircuitParams::reference_device(0.43), grid)
}

#[test]
fn small_nonlinearity_ground_manifold_valid() {
    let u = reference(0.05);
    let s = eigendecompose(
        &CircuitModel::build(&u, Truncation::default())
            .unwrap()
            .hamiltonian,
    )
    .unwrap();
    let g = gap_diagnostics(&s, DEFAULT_GAP_THRESHOLD);
    assert!(g.valid, "{g:?}");
    assert_eq!(g.ground_count, 16);
}

#[test]
fn ground_manifold_isolated_up_to_07() {
    let grid: Vec<f64> = (1..=14).map(|i| 0.05 * i as f64).collect();
    for r in gap_scan(&cfg(grid)).unwrap() {
        let g = r.gap.expect("spectrum");
        assert!(
            g.ground_count == 16 && g.delta_gap > 0.0,
            "β_c = {}: {g:?}",
            r.beta_c
        );
    }
}

#[test]
fn coupler_flux_sweep_even_in_offset() {
    let offsets = [-3e-3, -2e-3, -1e-3, 0.0, 1e-3, 2e-3, 3e-3];
    let rows = sweep_flux(&cfg(offsets.to_vec()), FluxMode::CouplerOnly)
        .unwrap()
        .rows;
    let fit = |i: usize| rows[i].spectral.clone().expect("spectral fit");
    for i in 0..3 {
        let (a, b) = (fit(i), fit(6 - i));
        assert_relative_eq!(a.j2, b.j2, max_relative = 1e-8);
        assert_relative_eq!(a.j4, b.j4, max_relative = 1e-8);
        assert_relative_eq!(a.j1, -b.j1, max_relative = 1e-8);
    }
    assert!(fit(3).j1.abs() <= 1e-8 * fit(3).j4.abs());
}

#[test]
fn susceptibilities_stable_under_step_halving() {
    let u = reference(0.43);
    let o = EvalOptions::default();
    let op = OperatingPoint {
        beta_c: 0.43,
        j2: f64::NAN,
        j4: f64::NAN,
        bracketed: false,
    };
    for p in SusceptibilityParameter::ALL {
        let s = susceptibility_at(&u, op.clone(), p, &o).unwrap();
        for (full, half) in [(s.chi4, s.chi4_half), (s.chi2, s.chi2_half)] {
            assert!(
                (full - half).abs() <= 0.05 * full.abs(),
                "{}: {full} vs {half}",
                p.label()
            );
        }
        if p == SusceptibilityParameter::CouplerInductiveEnergy {
            // Scaling every energy scales J: the normalized values are exact.
            assert_relative_eq!(s.chi4, 1.0, max_relative = 1e-6);
            assert_relative_eq!(s.chi2, 4.0, max_relative = 1e-6);
        }
    }
}

fn pattern(j2: f64, j4: f64) -> (Vec<usize>, f64) {
    let omega = 1.0;
    let m = IsingModel::from_splittings([omega; 4]).with_uniform(0.0, j2, 0.0, j4);
    let s = eigendecompose(&assemble_ising_model(&m)).unwrap();
    let t = two_excitation_splitting(&s, [omega; 4], 1e-6).unwrap();
    (t.multiset(), t.splitting)
}

#[test]
fn special_point_two_excitation_pattern() {
    let j2 = -0.01;
    let (multiset, splitting) = pattern(j2, -2.0 * j2);
    assert_eq!(multiset, vec![2, 4]);
    assert_relative_eq!(splitting, 3.0 * (-2.0 * j2), max_relative = 0.02);
    let (generic, _) = pattern(j2, 0.7 * j2.abs());
    assert_ne!(generic, vec![2, 4]);
}
