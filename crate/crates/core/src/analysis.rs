//! Parameter sweeps, cross-branch comparison tables, gap scans and
//! fabrication-error susceptibilities by finite differences.

use rayon::prelude::*;
use thiserror::Error;

use crate::circuit::{
    critical_current_for_beta, derive_unitless, CircuitParams, PhysicalConstants, UnitlessParams,
};
use crate::hamiltonian::{
    assemble_full, diagonalize_coupler, CircuitModel, IsingModel, Truncation,
};
use crate::oscillator::{qubit_reduction, AnharmonicMode};
use crate::spectrum::{
    eigendecompose, extract_couplings, gap_diagnostics, two_excitation_levels, FitOptions,
    GapDiagnostics, SpectrumError, DEFAULT_GAP_THRESHOLD,
};
use crate::swt::{analytic_couplings, numerical_swt, CouplingStrengths, NumericalSwtInput};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("empty grid")]
    EmptyGrid,
    #[error("grid is not strictly monotone at index {0}")]
    NonMonotoneGrid(usize),
    #[error("β_c grid value {0} outside (0, 1)")]
    BetaOutOfRange(f64),
    #[error("circuit: {0}")]
    Circuit(String),
    #[error("spectral couplings unavailable: {0}")]
    Spectral(String),
    #[error(
        "finite difference for {parameter} not converged: χ(h) = {full:.6e}, χ(h/2) = {half:.6e}"
    )]
    NonConvergent {
        parameter: &'static str,
        full: f64,
        half: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extraction {
    SpectralFit,
    AnalyticSwt,
    NumericalSwt,
    All,
}

impl Extraction {
    fn spectral(self) -> bool {
        matches!(self, Extraction::SpectralFit | Extraction::All)
    }
    fn analytic(self) -> bool {
        matches!(self, Extraction::AnalyticSwt | Extraction::All)
    }
    fn numerical(self) -> bool {
        matches!(self, Extraction::NumericalSwt | Extraction::All)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub truncation: Truncation,
    pub fit: FitOptions<f64>,
    pub gap_threshold: f64,
    /// Coupler eigenstates carried through the numerical expansion.
    pub swt_keep: usize,
    pub parallel: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            truncation: Truncation::default(),
            fit: FitOptions::default(),
            gap_threshold: DEFAULT_GAP_THRESHOLD,
            swt_keep: 20,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub base: CircuitParams<f64>,
    pub constants: PhysicalConstants<f64>,
    pub grid: Vec<f64>,
    pub extraction: Extraction,
    pub options: EvalOptions,
}

impl SweepConfig {
    pub fn new(base: CircuitParams<f64>, grid: Vec<f64>) -> Self {
        Self {
            base,
            constants: PhysicalConstants::si(),
            grid,
            extraction: Extraction::SpectralFit,
            options: EvalOptions::default(),
        }
    }

    fn check_grid(&self) -> Result<(), AnalysisError> {
        check_grid(&self.grid)
    }
}

pub fn check_grid(grid: &[f64]) -> Result<(), AnalysisError> {
    if grid.is_empty() {
        return Err(AnalysisError::EmptyGrid);
    }
    let up = grid.len() < 2 || grid[1] > grid[0];
    for k in 1..grid.len() {
        if (grid[k] > grid[k - 1]) != up || grid[k] == grid[k - 1] {
            return Err(AnalysisError::NonMonotoneGrid(k));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub spectral: Option<CouplingStrengths<f64>>,
    pub analytic: Option<CouplingStrengths<f64>>,
    pub numerical: Option<CouplingStrengths<f64>>,
    pub gap: Option<GapDiagnostics<f64>>,
    pub residual: Option<f64>,
    /// Empty when every requested branch succeeded.
    pub failures: Vec<String>,
}

impl SweepRow {
    pub fn status(&self) -> String {
        if self.failures.is_empty() {
            "ok".into()
        } else {
            self.failures.join("+")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.failures.is_empty())
    }
}

fn collect<I, O, F>(items: &[I], parallel: bool, f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

/// Largest two-level splitting (Hz) among the bare qubits.
pub fn max_qubit_splitting(u: &UnitlessParams<f64>, n: usize) -> f64 {
    (0..4)
        .map(|j| {
            AnharmonicMode::qubit(u.xi[j], u.beta[j], u.alpha[j], u.phi_x[j]).lowest_gap(n)
                * u.e_l[j]
        })
        .fold(0.0, f64::max)
}

/// Every requested extraction at one unitless parameter point.
pub fn evaluate(u: &UnitlessParams<f64>, which: Extraction, o: &EvalOptions) -> SweepRow {
    let mut row = SweepRow {
        value: f64::NAN,
        spectral: None,
        analytic: None,
        numerical: None,
        gap: None,
        residual: None,
        failures: Vec::new(),
    };
    if which.spectral() {
        match spectral_point(u, o) {
            Ok((fit, gap, mismatch)) => {
                row.residual = Some(fit.residual);
                row.spectral = Some(fit.couplings);
                row.gap = gap;
                if mismatch {
                    row.failures.push("ising_mismatch".into());
                }
            }
            Err((label, gap)) => {
                row.gap = gap;
                row.failures.push(label);
            }
        }
    }
    if which.analytic() {
        match qubit_reduction(u.xi[0], u.beta[0], u.alpha[0]) {
            Ok(w) => match analytic_couplings(u, &w) {
                Ok(c) => row.analytic = Some(c),
                Err(_) => row.failures.push("analytic_failed".into()),
            },
            Err(_) => row.failures.push("analytic_failed".into()),
        }
    }
    if which.numerical() {
        match numerical_point(u, o) {
            Some(c) => row.numerical = Some(c),
            None => row.failures.push("numerical_failed".into()),
        }
    }
    row
}

type SpectralOutcome = (
    crate::spectrum::CouplingFit<f64>,
    Option<GapDiagnostics<f64>>,
    bool,
);

fn spectral_point(
    u: &UnitlessParams<f64>,
    o: &EvalOptions,
) -> Result<SpectralOutcome, (String, Option<GapDiagnostics<f64>>)> {
    let model =
        CircuitModel::build(u, o.truncation).map_err(|_| ("model_failed".to_string(), None))?;
    let s =
        eigendecompose(&model.hamiltonian).map_err(|_| ("spectrum_failed".to_string(), None))?;
    let gap = gap_diagnostics(&s, o.gap_threshold);
    match extract_couplings(&s, &model.bare_ising(), &o.fit) {
        Ok(fit) => Ok((fit, Some(gap), false)),
        Err(SpectrumError::IsingMismatch { fit, .. }) => Ok((*fit, Some(gap), true)),
        Err(SpectrumError::GroundCount(_)) => Err(("subspace_mixing".into(), Some(gap))),
        Err(_) => Err(("fit_failed".into(), Some(gap))),
    }
}

fn numerical_point(u: &UnitlessParams<f64>, o: &EvalOptions) -> Option<CouplingStrengths<f64>> {
    let coupler = diagonalize_coupler(u, o.truncation.coupler_states).ok()?;
    let mut s = [0.0; 4];
    for (j, sj) in s.iter_mut().enumerate() {
        *sj = qubit_reduction(u.xi[j], u.beta[j], u.alpha[j]).ok()?.s;
    }
    let input = NumericalSwtInput {
        coupler: &coupler,
        energy: u.e_l_tilde_c,
        alpha: u.alpha,
        s,
        phi_cx: u.phi_cx,
        keep: o.swt_keep.min(coupler.energies.len()),
        qubit_energy_scale: max_qubit_splitting(u, o.truncation.qubit_states),
    };
    numerical_swt(&input).ok().map(|r| r.couplings)
}

/// Circuit parameters with the coupler critical current chosen to give `beta_c`.
pub fn with_beta_c(
    base: &CircuitParams<f64>,
    beta_c: f64,
    k: &PhysicalConstants<f64>,
) -> Result<CircuitParams<f64>, AnalysisError> {
    let u = derive_unitless(base, k).map_err(|e| AnalysisError::Circuit(e.to_string()))?;
    let mut p = *base;
    p.coupler_critical_current = critical_current_for_beta(beta_c, u.params.l_tilde_c, k);
    Ok(p)
}

fn circuit_row(
    p: &CircuitParams<f64>,
    k: &PhysicalConstants<f64>,
    value: f64,
    which: Extraction,
    o: &EvalOptions,
) -> SweepRow {
    match derive_unitless(p, k) {
        Ok(d) => SweepRow {
            value,
            ..evaluate(&d.params, which, o)
        },
        Err(_) => SweepRow {
            value,
            spectral: None,
            analytic: None,
            numerical: None,
            gap: None,
            residual: None,
            failures: vec!["circuit_invalid".into()],
        },
    }
}

/// Couplings over a grid of coupler screening parameters β_c.
pub fn sweep_beta(cfg: &SweepConfig) -> Result<SweepResult, AnalysisError> {
    cfg.check_grid()?;
    if let Some(&b) = cfg.grid.iter().find(|&&b| !(b > 0.0 && b < 1.0)) {
        return Err(AnalysisError::BetaOutOfRange(b));
    }
    let params: Vec<(f64, CircuitParams<f64>)> = cfg
        .grid
        .iter()
        .map(|&b| with_beta_c(&cfg.base, b, &cfg.constants).map(|p| (b, p)))
        .collect::<Result<_, _>>()?;
    let rows = collect(&params, cfg.options.parallel, |(b, p)| {
        circuit_row(p, &cfg.constants, *b, cfg.extraction, &cfg.options)
    });
    Ok(SweepResult { rows })
}

/// All three extraction branches side by side over a β_c grid.
pub fn compare_swt(cfg: &SweepConfig) -> Result<SweepResult, AnalysisError> {
    sweep_beta(&SweepConfig {
        extraction: Extraction::All,
        ..cfg.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluxMode {
    /// Only the coupler flux moves.
    CouplerOnly,
    /// Coupler and all qubit fluxes move together.
    CommonMode,
    /// Qubits held at fixed offsets (in Φ₀) while the coupler moves.
    FixedQubits([f64; 4]),
}

/// Couplings over coupler flux offsets (grid in units of Φ₀, relative to the
/// base configuration).
pub fn sweep_flux(cfg: &SweepConfig, mode: FluxMode) -> Result<SweepResult, AnalysisError> {
    cfg.check_grid()?;
    let phi0 = cfg.constants.flux_quantum;
    let params: Vec<(f64, CircuitParams<f64>)> = cfg
        .grid
        .iter()
        .map(|&d| {
            let mut p = cfg.base;
            p.coupler_flux += d * phi0;
            match mode {
                FluxMode::CouplerOnly => {}
                FluxMode::CommonMode => p.qubit_flux.iter_mut().for_each(|f| *f += d * phi0),
                FluxMode::FixedQubits(off) => {
                    for (f, o) in p.qubit_flux.iter_mut().zip(off) {
                        *f += o * phi0;
                    }
                }
            }
            (d, p)
        })
        .collect();
    let rows = collect(&params, cfg.options.parallel, |(d, p)| {
        circuit_row(p, &cfg.constants, *d, cfg.extraction, &cfg.options)
    });
    Ok(SweepResult { rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRow {
    pub beta_c: f64,
    pub gap: Option<GapDiagnostics<f64>>,
}

pub fn gap_scan(cfg: &SweepConfig) -> Result<Vec<GapRow>, AnalysisError> {
    cfg.check_grid()?;
    let params: Vec<(f64, CircuitParams<f64>)> = cfg
        .grid
        .iter()
        .map(|&b| with_beta_c(&cfg.base, b, &cfg.constants).map(|p| (b, p)))
        .collect::<Result<_, _>>()?;
    Ok(collect(&params, cfg.options.parallel, |(b, p)| {
        let gap = derive_unitless(p, &cfg.constants).ok().and_then(|d| {
            let model = CircuitModel::build(&d.params, cfg.options.truncation).ok()?;
            let s = eigendecompose(&model.hamiltonian).ok()?;
            Some(gap_diagnostics(&s, cfg.options.gap_threshold))
        });
        GapRow { beta_c: *b, gap }
    }))
}

/// First β_c where delta_gap − delta_max changes sign, by linear interpolation.
pub fn gap_crossover(rows: &[GapRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.gap.map(|g| (r.beta_c, g.delta_gap - g.delta_max)))
        .collect();
    pts.windows(2)
        .find(|w| w[0].1.signum() != w[1].1.signum())
        .map(|w| {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            x0 - y0 * (x1 - x0) / (y1 - y0)
        })
}

/// One row of the two-excitation spectrum versus the qubit frequency ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub ratio: f64,
    /// The 16 coupler-ground levels relative to the lowest, ascending.
    pub ground: Vec<f64>,
    /// The six two-excitation levels relative to the lowest ground level.
    pub two_excitation: Option<Vec<f64>>,
}

/// Coupler-ground spectrum with the splittings of qubits 1 and 2 scaled by
/// each `ratio` relative to qubits 3 and 4.
pub fn spectrum_vs_ratio(
    u: &UnitlessParams<f64>,
    ratios: &[f64],
    o: &EvalOptions,
) -> Result<Vec<RatioRow>, AnalysisError> {
    check_grid(ratios)?;
    let model =
        CircuitModel::build(u, o.truncation).map_err(|e| AnalysisError::Spectral(e.to_string()))?;
    let rows = collect(ratios, o.parallel, |&ratio| {
        let mut qubits = model.qubits.clone();
        for q in qubits.iter_mut().take(2) {
            q.h2 *= ratio;
        }
        let spectrum = assemble_full(&qubits, &model.coupler, u, o.truncation.coupler_keep)
            .ok()
            .and_then(|h| eigendecompose(&h).ok());
        let Some(s) = spectrum else {
            return RatioRow {
                ratio,
                ground: Vec::new(),
                two_excitation: None,
            };
        };
        let mut ground = s.ground_levels();
        ground.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let e0 = ground.first().copied().unwrap_or(0.0);
        let two = two_excitation_levels(&s)
            .ok()
            .map(|(l, _)| l.iter().map(|x| x - e0).collect());
        RatioRow {
            ratio,
            ground: ground.iter().map(|x| x - e0).collect(),
            two_excitation: two,
        }
    });
    Ok(rows)
}

/// Spectral-fit (J2, J4) at a unitless point; Ising-mismatched fits still count.
pub fn spectral_j(u: &UnitlessParams<f64>, o: &EvalOptions) -> Result<(f64, f64), AnalysisError> {
    spectral_point(u, o)
        .map(|(fit, _, _)| (fit.couplings.j2, fit.couplings.j4))
        .map_err(|(label, _)| AnalysisError::Spectral(label))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub beta_c: f64,
    pub j2: f64,
    pub j4: f64,
    /// False when J4 + 2·J2 has no sign change on the grid and the fallback was used.
    pub bracketed: bool,
}

/// β_c used when no J4 = −2·J2 point exists on the search grid.
pub const FALLBACK_BETA_C: f64 = 0.43;

fn unitless_at(
    base: &CircuitParams<f64>,
    beta_c: f64,
    k: &PhysicalConstants<f64>,
) -> Result<UnitlessParams<f64>, AnalysisError> {
    let p = with_beta_c(base, beta_c, k)?;
    derive_unitless(&p, k)
        .map(|d| d.params)
        .map_err(|e| AnalysisError::Circuit(e.to_string()))
}

/// β_c with J4 = −2·J2: grid bracketing followed by bisection.
pub fn find_operating_point(
    base: &CircuitParams<f64>,
    k: &PhysicalConstants<f64>,
    grid: &[f64],
    o: &EvalOptions,
) -> Result<OperatingPoint, AnalysisError> {
    check_grid(grid)?;
    let f = |b: f64| -> Option<(f64, f64)> {
        unitless_at(base, b, k)
            .ok()
            .and_then(|u| spectral_j(&u, o).ok())
    };
    let vals = collect(grid, o.parallel, |&b| f(b));
    let pts: Vec<(f64, f64, f64)> = grid
        .iter()
        .zip(&vals)
        .filter_map(|(&b, v)| v.map(|(j2, j4)| (b, j2, j4)))
        .collect();
    let bracket = pts
        .windows(2)
        .find(|w| (w[0].2 + 2.0 * w[0].1).signum() != (w[1].2 + 2.0 * w[1].1).signum());
    let Some(w) = bracket else {
        let u = unitless_at(base, FALLBACK_BETA_C, k)?;
        let (j2, j4) = spectral_j(&u, o)?;
        return Ok(OperatingPoint {
            beta_c: FALLBACK_BETA_C,
            j2,
            j4,
            bracketed: false,
        });
    };
    let (mut lo, mut hi) = (w[0].0, w[1].0);
    let mut g_lo = w[0].2 + 2.0 * w[0].1;
    let mut best = (lo, w[0].1, w[0].2);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let Some((j2, j4)) = f(mid) else { break };
        best = (mid, j2, j4);
        let g = j4 + 2.0 * j2;
        if g.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() < 1e-7 {
            break;
        }
    }
    Ok(OperatingPoint {
        beta_c: best.0,
        j2: best.1,
        j4: best.2,
        bracketed: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SusceptibilityParameter {
    /// Qubit junction energies E_Jj.
    QubitJosephson,
    /// Coupler junction energy E_Jc.
    CouplerJosephson,
    /// Coupler inductance (through L̃_c).
    CouplerInductance,
    /// Overall coupler inductive energy scale E_L̃c.
    CouplerInductiveEnergy,
    /// Qubit inductive energies E_Lj.
    QubitInductiveEnergy,
}

impl SusceptibilityParameter {
    pub const ALL: [SusceptibilityParameter; 5] = [
        SusceptibilityParameter::QubitJosephson,
        SusceptibilityParameter::CouplerJosephson,
        SusceptibilityParameter::CouplerInductance,
        SusceptibilityParameter::CouplerInductiveEnergy,
        SusceptibilityParameter::QubitInductiveEnergy,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SusceptibilityParameter::QubitJosephson => "E_Jj",
            SusceptibilityParameter::CouplerJosephson => "E_Jc",
            SusceptibilityParameter::CouplerInductance => "L_c",
            SusceptibilityParameter::CouplerInductiveEnergy => "E_Ltilde_c",
            SusceptibilityParameter::QubitInductiveEnergy => "E_Lj",
        }
    }

    pub fn normalization(self) -> &'static str {
        match self {
            SusceptibilityParameter::QubitJosephson
            | SusceptibilityParameter::CouplerJosephson
            | SusceptibilityParameter::CouplerInductiveEnergy => "E_Ltilde_c",
            SusceptibilityParameter::CouplerInductance => "Ltilde_c",
            SusceptibilityParameter::QubitInductiveEnergy => "E_Lj",
        }
    }
}

/// Normalized susceptibilities (dimensionless: χ multiplied by the
/// normalization constant) and the raw logarithmic derivatives behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct Susceptibility {
    pub parameter: SusceptibilityParameter,
    pub chi4: f64,
    pub chi2: f64,
    /// Same quantities at half the step.
    pub chi4_half: f64,
    pub chi2_half: f64,
    pub step: f64,
    pub operating_point: OperatingPoint,
    /// (direction, ∂J4/∂x, ∂J2/∂x) per perturbed unitless direction, Hz.
    pub raw: Vec<(&'static str, f64, f64)>,
}

/// Relative step of the central differences.
pub const FD_STEP: f64 = 1e-4;
/// Accepted relative change of χ when the step is halved.
pub const FD_AGREEMENT: f64 = 0.05;

type Perturb = fn(&mut UnitlessParams<f64>, f64);

fn perturb_beta_all(u: &mut UnitlessParams<f64>, d: f64) {
    u.beta.iter_mut().for_each(|b| *b += d);
}
fn perturb_beta_c(u: &mut UnitlessParams<f64>, d: f64) {
    u.beta_c += d;
}
fn perturb_xi_c(u: &mut UnitlessParams<f64>, d: f64) {
    u.xi_c += d;
}
fn perturb_log_energy(u: &mut UnitlessParams<f64>, d: f64) {
    u.e_l_tilde_c *= 1.0 + d;
    u.e_l.iter_mut().for_each(|e| *e *= 1.0 + d);
}

/// Central differences (∂J4, ∂J2) along one direction with absolute step h.
fn derivative(
    u: &UnitlessParams<f64>,
    dir: Perturb,
    h: f64,
    o: &EvalOptions,
) -> Result<(f64, f64), AnalysisError> {
    let eval = |d: f64| {
        let mut v = *u;
        dir(&mut v, d);
        spectral_j(&v, o)
    };
    let (j2p, j4p) = eval(h)?;
    let (j2m, j4m) = eval(-h)?;
    Ok(((j4p - j4m) / (2.0 * h), (j2p - j2m) / (2.0 * h)))
}

/// Susceptibility of (J4, J2) to one fabrication parameter at the J4 = −2·J2
/// operating point located on `grid`.
///
/// Conventions (J2 is the coupling of one pair, β_j the screening of one qubit):
/// - E_Jj: E_L̃c·χ4 = (4/J4)|∂J4/∂β_j|, E_L̃c·χ2 = (12/J2)|∂J2/∂β_j|; the
///   single-qubit derivatives come from a common-mode shift of all β_j
///   (∂J4/∂β_j = ¼·dJ4/dβ, ∂J2/∂β_j = ½·dJ2/dβ).
/// - E_Jc: (1/J)|∂J/∂β_c|.
/// - L_c: L̃_c·χ = 1 + (ξ_c/2J)|∂J/∂ξ_c| + (β_c/J)|∂J/∂β_c|.
/// - E_L̃c: (1/J)|∂J/∂ln E| with every energy scaled, times 4 for J2.
/// - E_Lj: β_j times the E_Jj values.
pub fn susceptibility(
    base: &CircuitParams<f64>,
    k: &PhysicalConstants<f64>,
    parameter: SusceptibilityParameter,
    grid: &[f64],
    o: &EvalOptions,
) -> Result<Susceptibility, AnalysisError> {
    let op = find_operating_point(base, k, grid, o)?;
    susceptibility_at(&unitless_at(base, op.beta_c, k)?, op, parameter, o)
}

pub fn susceptibility_at(
    u: &UnitlessParams<f64>,
    op: OperatingPoint,
    parameter: SusceptibilityParameter,
    o: &EvalOptions,
) -> Result<Susceptibility, AnalysisError> {
    let (j2, j4) = spectral_j(u, o)?;
    let beta_j = u.beta.iter().sum::<f64>() / 4.0;
    let chis = |h: f64| -> Result<(f64, f64, Vec<(&'static str, f64, f64)>), AnalysisError> {
        use SusceptibilityParameter as P;
        Ok(match parameter {
            P::QubitJosephson | P::QubitInductiveEnergy => {
                let (d4, d2) = derivative(u, perturb_beta_all, h * beta_j, o)?;
                let scale = if parameter == P::QubitInductiveEnergy {
                    beta_j
                } else {
                    1.0
                };
                let (d4j, d2j) = (d4 / 4.0, d2 / 2.0);
                (
                    scale * 4.0 * d4j.abs() / j4.abs(),
                    scale * 12.0 * d2j.abs() / j2.abs(),
                    vec![("beta_j", d4j, d2j)],
                )
            }
            P::CouplerJosephson => {
                let (d4, d2) = derivative(u, perturb_beta_c, h * u.beta_c, o)?;
                (
                    d4.abs() / j4.abs(),
                    d2.abs() / j2.abs(),
                    vec![("beta_c", d4, d2)],
                )
            }
            P::CouplerInductance => {
                let (x4, x2) = derivative(u, perturb_xi_c, h * u.xi_c, o)?;
                let (b4, b2) = derivative(u, perturb_beta_c, h * u.beta_c, o)?;
                let c4 = 1.0 + u.xi_c / 2.0 * x4.abs() / j4.abs() + u.beta_c * b4.abs() / j4.abs();
                let c2 = 1.0 + u.xi_c / 2.0 * x2.abs() / j2.abs() + u.beta_c * b2.abs() / j2.abs();
                (c4, c2, vec![("xi_c", x4, x2), ("beta_c", b4, b2)])
            }
            P::CouplerInductiveEnergy => {
                let (d4, d2) = derivative(u, perturb_log_energy, h, o)?;
                (
                    d4.abs() / j4.abs(),
                    4.0 * d2.abs() / j2.abs(),
                    vec![("ln_E", d4, d2)],
                )
            }
        })
    };
    let (chi4, chi2, raw) = chis(FD_STEP)?;
    let (chi4_half, chi2_half, _) = chis(FD_STEP / 2.0)?;
    for (full, half) in [(chi4, chi4_half), (chi2, chi2_half)] {
        if (full - half).abs() > FD_AGREEMENT * full.abs().max(half.abs()) {
            return Err(AnalysisError::NonConvergent {
                parameter: parameter.label(),
                full,
                half,
            });
        }
    }
    Ok(Susceptibility {
        parameter,
        chi4,
        chi2,
        chi4_half,
        chi2_half,
        step: FD_STEP,
        operating_point: op,
        raw,
    })
}

/// Bare Ising model of the reduced qubits at `u`.
pub fn bare_model(
    u: &UnitlessParams<f64>,
    t: Truncation,
) -> Result<IsingModel<f64>, AnalysisError> {
    CircuitModel::build(u, t)
        .map(|m| m.bare_ising())
        .map_err(|e| AnalysisError::Spectral(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(grid: Vec<f64>) -> SweepConfig {
        SweepConfig::new(CircuitParams::reference_device(0.43), grid)
    }

    #[test]
    fn grid_validation() {
        assert_eq!(check_grid(&[]), Err(AnalysisError::EmptyGrid));
        assert_eq!(
            check_grid(&[0.1, 0.3, 0.2]),
            Err(AnalysisError::NonMonotoneGrid(2))
        );
        assert_eq!(
            check_grid(&[0.1, 0.1]),
            Err(AnalysisError::NonMonotoneGrid(1))
        );
        assert!(check_grid(&[0.3, 0.2, 0.1]).is_ok());
        assert!(check_grid(&[0.3]).is_ok());
    }

    #[test]
    fn beta_range_enforced() {
        assert!(matches!(
            sweep_beta(&cfg(vec![0.5, 1.2])),
            Err(AnalysisError::BetaOutOfRange(_))
        ));
    }

    #[test]
    fn serial_and_parallel_identical() {
        let mut c = cfg(vec![0.1, 0.3, 0.43]);
        c.extraction = Extraction::All;
        let par = sweep_beta(&c).unwrap();
        c.options.parallel = false;
        let ser = sweep_beta(&c).unwrap();
        assert_eq!(par, ser);
        assert_eq!(
            par.rows.iter().map(|r| r.value).collect::<Vec<_>>(),
            vec![0.1, 0.3, 0.43]
        );
    }

    #[test]
    fn zero_offset_flux_sweep_matches_beta_sweep() {
        let beta = cfg(vec![0.43]);
        let b = sweep_beta(&beta).unwrap().rows[0].spectral.clone().unwrap();
        let f = sweep_flux(&cfg(vec![0.0]), FluxMode::CouplerOnly)
            .unwrap()
            .rows[0]
            .spectral
            .clone()
            .unwrap();
        assert!((b.j4 - f.j4).abs() <= 1e-9 * b.j4.abs());
        assert!((b.j2 - f.j2).abs() <= 1e-9 * b.j2.abs());
    }

    #[test]
    fn crossover_interpolation() {
        let g = |gap: f64, max: f64| {
            Some(GapDiagnostics {
                delta_gap: gap,
                delta_max: max,
                valid: gap > 3.0 * max,
                ground_count: 16,
            })
        };
        let rows = [
            GapRow {
                beta_c: 0.6,
                gap: g(3.0, 1.0),
            },
            GapRow {
                beta_c: 0.7,
                gap: g(2.0, 1.0),
            },
            GapRow {
                beta_c: 0.8,
                gap: g(1.0, 2.0),
            },
        ];
        let x = gap_crossover(&rows).unwrap();
        assert!((x - 0.75).abs() < 1e-12);
    }

    #[test]
    fn energy_scale_susceptibility_exact() {
        let u = unitless_at(
            &CircuitParams::reference_device(0.43),
            0.43,
            &PhysicalConstants::si(),
        )
        .unwrap();
        let o = EvalOptions::default();
        let (j2, j4) = spectral_j(&u, &o).unwrap();
        let op = OperatingPoint {
            beta_c: 0.43,
            j2,
            j4,
            bracketed: false,
        };
        let s =
            susceptibility_at(&u, op, SusceptibilityParameter::CouplerInductiveEnergy, &o).unwrap();
        assert!((s.chi4 - 1.0).abs() < 1e-6, "{}", s.chi4);
        assert!((s.chi2 - 4.0).abs() < 4e-6, "{}", s.chi2);
    }
}
