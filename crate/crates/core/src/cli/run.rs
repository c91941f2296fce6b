//! Subcommand dispatch: each command turns a resolved configuration into one
//! CSV table.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use super::config::{parse_config, ConfigError, RunConfig};
use super::output::{Cell, Column, Table};
use crate::analysis::{
    compare_swt, find_operating_point, gap_crossover, gap_scan, spectrum_vs_ratio,
    susceptibility_at, sweep_beta, sweep_flux, with_beta_c, AnalysisError, Extraction,
    SusceptibilityParameter, SweepConfig, SweepRow,
};
use crate::circuit::{derive_unitless, CircuitParams};
use crate::hamiltonian::{assemble_ising_model, CircuitModel, IsingModel};
use crate::oscillator::{cosine_matrix, displacement_matrix};
use crate::spectrum::{eigendecompose, extract_couplings, FitOptions};
use crate::swt::CouplingStrengths;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    SweepBeta,
    SweepFlux,
    Susceptibility,
    CompareSwt,
    GapScan,
    /// Seeded randomized invariant checks.
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::SweepBeta => "sweep-beta",
            Command::SweepFlux => "sweep-flux",
            Command::Susceptibility => "susceptibility",
            Command::CompareSwt => "compare-swt",
            Command::GapScan => "gap-scan",
            Command::Check => "check",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("`{command}` needs `[sweep] {key}`")]
    MissingGrid {
        command: &'static str,
        key: &'static str,
    },
    #[error("`{0}` needs --config")]
    MissingConfig(&'static str),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::MissingGrid { .. } | RunError::MissingConfig(_) => 2,
            RunError::Analysis(
                AnalysisError::EmptyGrid
                | AnalysisError::NonMonotoneGrid(_)
                | AnalysisError::BetaOutOfRange(_)
                | AnalysisError::Circuit(_),
            ) => 2,
            _ => 1,
        }
    }
}

/// A computed table and whether any point failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: Table,
    pub notes: Vec<String>,
    pub partial_failure: bool,
}

impl Report {
    pub fn render(&self, command: Command, cfg: Option<&RunConfig>, seed: u64) -> String {
        let mut text = cfg.map(RunConfig::to_config_text).unwrap_or_default();
        if command == Command::Check {
            text.push_str(&format!("seed = {seed}\n"));
        }
        self.table.render(
            command.name(),
            &text,
            &self.notes,
            cfg.map_or(super::config::DEFAULT_PRECISION, |c| c.precision),
        )
    }
}

fn sweep_config(cfg: &RunConfig, grid: Vec<f64>, extraction: Extraction) -> SweepConfig {
    SweepConfig {
        base: cfg.circuit,
        constants: cfg.constants,
        grid,
        extraction,
        options: cfg.options,
    }
}

fn branches(
    extraction: Extraction,
) -> Vec<(
    &'static str,
    fn(&SweepRow) -> &Option<CouplingStrengths<f64>>,
)> {
    let spectral: (
        &'static str,
        fn(&SweepRow) -> &Option<CouplingStrengths<f64>>,
    ) = ("spectral_fit", |r| &r.spectral);
    let analytic: (
        &'static str,
        fn(&SweepRow) -> &Option<CouplingStrengths<f64>>,
    ) = ("analytic_swt", |r| &r.analytic);
    let numerical: (
        &'static str,
        fn(&SweepRow) -> &Option<CouplingStrengths<f64>>,
    ) = ("numerical_swt", |r| &r.numerical);
    match extraction {
        Extraction::SpectralFit => vec![spectral],
        Extraction::AnalyticSwt => vec![analytic],
        Extraction::NumericalSwt => vec![numerical],
        Extraction::All => vec![spectral, analytic, numerical],
    }
}

fn sweep_table(first: Column, rows: &[SweepRow], extraction: Extraction) -> Table {
    let b = branches(extraction);
    let prefixed = b.len() > 1;
    let mut cols = vec![first];
    for (name, _) in &b {
        for j in ["J1_Hz", "J2_Hz", "J3_Hz", "J4_Hz"] {
            cols.push(Column::new(
                if prefixed {
                    format!("{name}_{j}")
                } else {
                    j.to_string()
                },
                "Hz",
            ));
        }
    }
    cols.extend([
        Column::new("residual", ""),
        Column::new("delta_gap_Hz", "Hz"),
        Column::new("delta_max_Hz", "Hz"),
        Column::new("status", ""),
    ]);
    let mut t = Table::new(cols);
    for r in rows {
        let mut cells: Vec<Cell> = vec![r.value.into()];
        for (_, get) in &b {
            match get(r) {
                Some(c) => cells.extend([c.j1, c.j2, c.j3, c.j4].map(Cell::from)),
                None => cells.extend(std::iter::repeat_n(Cell::Missing, 4)),
            }
        }
        cells.push(r.residual.into());
        cells.push(r.gap.map(|g| g.delta_gap).into());
        cells.push(r.gap.map(|g| g.delta_max).into());
        cells.push(r.status().into());
        t.push(cells);
    }
    t
}

fn grid<'a>(
    g: &'a Option<Vec<f64>>,
    command: Command,
    key: &'static str,
) -> Result<&'a [f64], RunError> {
    g.as_deref().ok_or(RunError::MissingGrid {
        command: command.name(),
        key,
    })
}

/// Compute the table of `command`. `cfg` may be absent only for `check`.
pub fn compute(command: Command, cfg: Option<&RunConfig>, seed: u64) -> Result<Report, RunError> {
    if command == Command::Check {
        return Ok(check(seed));
    }
    let cfg = cfg.ok_or(RunError::MissingConfig(command.name()))?;
    let mut notes = Vec::new();
    let (table, partial) = match command {
        Command::SweepBeta | Command::CompareSwt => {
            let g = grid(&cfg.sweep.beta_c, command, "beta_c")?.to_vec();
            let (res, ex) = if command == Command::SweepBeta {
                (
                    sweep_beta(&sweep_config(cfg, g, cfg.extraction))?,
                    cfg.extraction,
                )
            } else {
                (
                    compare_swt(&sweep_config(cfg, g, Extraction::All))?,
                    Extraction::All,
                )
            };
            (
                sweep_table(Column::new("beta_c", ""), &res.rows, ex),
                !res.all_ok(),
            )
        }
        Command::SweepFlux => {
            let g = grid(&cfg.sweep.coupler_offset, command, "coupler_offset")?.to_vec();
            let res = sweep_flux(&sweep_config(cfg, g, cfg.extraction), cfg.sweep.flux_mode)?;
            (
                sweep_table(
                    Column::new("offset_Phi0", "Phi0"),
                    &res.rows,
                    cfg.extraction,
                ),
                !res.all_ok(),
            )
        }
        Command::GapScan => {
            let g = grid(&cfg.sweep.beta_c, command, "beta_c")?.to_vec();
            let rows = gap_scan(&sweep_config(cfg, g, cfg.extraction))?;
            let mut t = Table::new(vec![
                Column::new("beta_c", ""),
                Column::new("delta_gap_Hz", "Hz"),
                Column::new("delta_max_Hz", "Hz"),
                Column::new("ground_count", ""),
                Column::new("valid", ""),
            ]);
            for r in &rows {
                t.push(match r.gap {
                    Some(g) => vec![
                        r.beta_c.into(),
                        g.delta_gap.into(),
                        g.delta_max.into(),
                        g.ground_count.into(),
                        g.valid.into(),
                    ],
                    None => vec![
                        r.beta_c.into(),
                        Cell::Missing,
                        Cell::Missing,
                        Cell::Missing,
                        Cell::Missing,
                    ],
                });
            }
            match gap_crossover(&rows) {
                Some(b) => notes.push(format!("crossover_beta_c = {b:e}")),
                None => notes.push("crossover_beta_c = none".into()),
            }
            (t, rows.iter().any(|r| r.gap.is_none()))
        }
        Command::Spectrum => spectrum_table(cfg)?,
        Command::Susceptibility => susceptibility_table(cfg, &mut notes)?,
        Command::Check => unreachable!(),
    };
    Ok(Report {
        table,
        notes,
        partial_failure: partial,
    })
}

fn spectrum_table(cfg: &RunConfig) -> Result<(Table, bool), RunError> {
    let u = derive_unitless(&cfg.circuit, &cfg.constants)
        .map_err(|e| AnalysisError::Circuit(e.to_string()))?
        .params;
    let ratios = cfg.sweep.ratio.clone().unwrap_or_else(|| vec![1.0]);
    let rows = spectrum_vs_ratio(&u, &ratios, &cfg.options)?;
    let mut cols = vec![Column::new("ratio", "")];
    cols.extend((0..16).map(|k| Column::new(format!("E{k}_Hz"), "Hz")));
    cols.extend((0..6).map(|k| Column::new(format!("two_excitation{k}_Hz"), "Hz")));
    let mut t = Table::new(cols);
    let mut partial = false;
    for r in &rows {
        let mut cells: Vec<Cell> = vec![r.ratio.into()];
        cells.extend((0..16).map(|k| r.ground.get(k).copied().into()));
        match &r.two_excitation {
            Some(v) => cells.extend(v.iter().map(|&x| Cell::Num(x))),
            None => cells.extend(std::iter::repeat_n(Cell::Missing, 6)),
        }
        partial |= r.ground.len() != 16 || r.two_excitation.is_none();
        t.push(cells);
    }
    Ok((t, partial))
}

fn susceptibility_table(
    cfg: &RunConfig,
    notes: &mut Vec<String>,
) -> Result<(Table, bool), RunError> {
    let op = find_operating_point(
        &cfg.circuit,
        &cfg.constants,
        &cfg.sweep.operating_grid,
        &cfg.options,
    )?;
    notes.push(format!(
        "operating point: beta_c = {:e}, J2 = {:e} Hz, J4 = {:e} Hz, bracketed = {}",
        op.beta_c, op.j2, op.j4, op.bracketed
    ));
    let p = with_beta_c(&cfg.circuit, op.beta_c, &cfg.constants)?;
    let u = derive_unitless(&p, &cfg.constants)
        .map_err(|e| AnalysisError::Circuit(e.to_string()))?
        .params;
    let mut t = Table::new(vec![
        Column::new("parameter", ""),
        Column::new("normalization", ""),
        Column::new("chi4", ""),
        Column::new("chi2", ""),
        Column::new("chi4_half_step", ""),
        Column::new("chi2_half_step", ""),
        Column::new("step", ""),
        Column::new("derivatives", "Hz per unit"),
        Column::new("status", ""),
    ]);
    let mut partial = false;
    for param in SusceptibilityParameter::ALL {
        let mut cells: Vec<Cell> = vec![param.label().into(), param.normalization().into()];
        match susceptibility_at(&u, op.clone(), param, &cfg.options) {
            Ok(s) => {
                cells.extend([s.chi4, s.chi2, s.chi4_half, s.chi2_half, s.step].map(Cell::from));
                let raw: Vec<String> = s
                    .raw
                    .iter()
                    .map(|(n, d4, d2)| {
                        format!(
                            "d{n}:{}:{}",
                            super::output::format_number(*d4, cfg.precision),
                            super::output::format_number(*d2, cfg.precision)
                        )
                    })
                    .collect();
                cells.push(raw.join(";").into());
                cells.push("ok".into());
            }
            Err(e) => {
                partial = true;
                cells.extend(std::iter::repeat_n(Cell::Missing, 5));
                cells.push("".into());
                cells.push(match e {
                    AnalysisError::NonConvergent { .. } => "fd_nonconvergent".into(),
                    _ => "failed".into(),
                });
            }
        }
        t.push(cells);
    }
    Ok((t, partial))
}

/// ⟨m|e^{i r (a+a†)}|n⟩ by trapezoidal quadrature over Hermite functions.
fn displacement_by_quadrature(m: usize, n: usize, r: f64) -> Complex<f64> {
    let (lim, pts) = (14.0, 6001);
    let h = 2.0 * lim / (pts - 1) as f64;
    let top = m.max(n);
    let mut acc = Complex::new(0.0, 0.0);
    for i in 0..pts {
        let x = -lim + h * i as f64;
        // Normalized Hermite functions by the stable three-term recurrence.
        let mut psi = vec![0.0; top + 1];
        psi[0] = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
        if top >= 1 {
            psi[1] = std::f64::consts::SQRT_2 * x * psi[0];
        }
        for k in 2..=top {
            psi[k] = (2.0 / k as f64).sqrt() * x * psi[k - 1]
                - ((k - 1) as f64 / k as f64).sqrt() * psi[k - 2];
        }
        let phase = Complex::new(0.0, r * std::f64::consts::SQRT_2 * x).exp();
        acc += phase * psi[m] * psi[n] * h;
    }
    acc
}

/// Seeded randomized invariant checks: closed-form displacement elements
/// against quadrature, Ising fit round trips, exact symmetry of cosine
/// matrices and orthonormality of full-circuit eigenbases.
pub fn check(seed: u64) -> Report {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut t = Table::new(vec![
        Column::new("check", ""),
        Column::new("trial", ""),
        Column::new("error", ""),
        Column::new("tolerance", ""),
        Column::new("pass", ""),
    ]);
    let mut fail = false;
    let mut record = |t: &mut Table, name: &str, trial: usize, err: f64, tol: f64| {
        let ok = err <= tol;
        fail |= !ok;
        t.push(vec![
            name.into(),
            trial.into(),
            err.into(),
            tol.into(),
            ok.into(),
        ]);
    };
    for trial in 0..16 {
        let r: f64 = rng.random_range(0.05..2.0);
        let (m, n) = (rng.random_range(0..12usize), rng.random_range(0..12usize));
        let d = displacement_matrix::<f64>(16, r);
        let err = (d[(m, n)] - displacement_by_quadrature(m, n, r)).norm();
        record(&mut t, "laguerre_vs_quadrature", trial, err, 1e-8);
    }
    for trial in 0..16 {
        let omega: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.8..1.2));
        let (j1, j2, j4) = (
            rng.random_range(-0.02..0.02),
            rng.random_range(-0.05..0.05),
            rng.random_range(-0.05..0.05),
        );
        let bare = IsingModel::from_splittings(omega);
        let m = bare.clone().with_uniform(j1, j2, 0.0, j4);
        let err = eigendecompose(&assemble_ising_model(&m))
            .ok()
            .and_then(|s| extract_couplings(&s, &bare, &FitOptions::default()).ok())
            .map_or(f64::INFINITY, |f| {
                (f.couplings.j1 - j1)
                    .abs()
                    .max((f.couplings.j2 - j2).abs())
                    .max((f.couplings.j4 - j4).abs())
            });
        record(&mut t, "fit_round_trip", trial, err, 1e-9);
    }
    for trial in 0..16 {
        let c = cosine_matrix::<f64>(24, rng.random_range(0.01..1.5), rng.random_range(-3.0..3.0));
        let a: &DMatrix<f64> = &c.data;
        record(
            &mut t,
            "cosine_hermitian",
            trial,
            (a - a.transpose()).amax(),
            0.0,
        );
    }
    for trial in 0..3 {
        let beta_c = rng.random_range(0.05..0.7);
        let p = CircuitParams::reference_device(beta_c);
        let err = derive_unitless(&p, &crate::circuit::PhysicalConstants::si())
            .ok()
            .and_then(|d| {
                CircuitModel::build(&d.params, crate::hamiltonian::Truncation::default()).ok()
            })
            .and_then(|m| eigendecompose(&m.hamiltonian).ok())
            .map_or(f64::INFINITY, |s| {
                let v = &s.eigenvectors;
                (v.transpose() * v - DMatrix::<f64>::identity(v.ncols(), v.ncols())).amax()
            });
        record(&mut t, "circuit_eigenbasis_orthonormal", trial, err, 1e-10);
    }
    Report {
        table: t,
        notes: Vec::new(),
        partial_failure: fail,
    }
}

/// Parse, compute and write `<out>/<file or command>.csv`. Returns the process
/// exit code: 0 success, 1 per-point partial failure, 2 configuration error.
pub fn execute(command: Command, config: Option<&Path>, out: &Path, seed: u64) -> i32 {
    match execute_inner(command, config, out, seed) {
        Ok((path, partial)) => {
            eprintln!("wrote {}", path.display());
            if partial {
                eprintln!("some points failed; see the status column");
                1
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute_inner(
    command: Command,
    config: Option<&Path>,
    out: &Path,
    seed: u64,
) -> Result<(PathBuf, bool), RunError> {
    let cfg = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
                path: path.into(),
                source,
            })?;
            Some(parse_config(&text)?)
        }
        None => None,
    };
    let report = compute(command, cfg.as_ref(), seed)?;
    let text = report.render(command, cfg.as_ref(), seed);
    std::fs::create_dir_all(out).map_err(|source| RunError::Io {
        path: out.into(),
        source,
    })?;
    let name = cfg
        .as_ref()
        .and_then(|c| c.file.clone())
        .unwrap_or_else(|| format!("{}.csv", command.name()));
    let path = out.join(name);
    std::fs::write(&path, text).map_err(|source| RunError::Io {
        path: path.clone(),
        source,
    })?;
    Ok((path, report.partial_failure))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_harness_passes_and_is_seeded() {
        let a = check(7);
        assert!(!a.partial_failure, "{:?}", a.table.rows);
        assert_eq!(
            a.render(Command::Check, None, 7),
            check(7).render(Command::Check, None, 7)
        );
        assert_ne!(a.table.rows, check(8).table.rows);
    }

    #[test]
    fn missing_grid_is_config_error() {
        let cfg = parse_config(
            "[circuit]\nL_j = 817 pH\nC_j = 77 fF\nbeta_j = 1.1\nM_j = 40 pH\nL_c = 170 pH\nC_c = 407 fF\nbeta_c = 0.43\n",
        )
        .unwrap();
        let e = compute(Command::SweepBeta, Some(&cfg), 0).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert_eq!(RunError::MissingConfig("x").exit_code(), 2);
    }
}
