//! Line-oriented run configuration: `[section]` headers, `key = value unit`
//! entries, `#` comments. Physical quantities require a unit.

use std::fmt::Write as _;

use thiserror::Error;

use crate::analysis::{check_grid, EvalOptions, Extraction, FluxMode};
use crate::circuit::{
    critical_current_for_beta, derive_unitless, CircuitParams, PhysicalConstants,
};
use crate::hamiltonian::Truncation;
use crate::spectrum::{FitOptions, DEFAULT_GAP_THRESHOLD};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn line_err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Line {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    Inductance,
    Capacitance,
    Current,
    Flux,
    /// Flux offsets, stored in units of Φ₀.
    FluxOffset,
    None,
}

fn unit_factor(dim: Dimension, unit: &str, phi0: f64) -> Option<f64> {
    let f = match (dim, unit) {
        (Dimension::Inductance, "pH") => 1e-12,
        (Dimension::Inductance, "nH") => 1e-9,
        (Dimension::Inductance, "uH" | "µH") => 1e-6,
        (Dimension::Inductance, "H") => 1.0,
        (Dimension::Capacitance, "fF") => 1e-15,
        (Dimension::Capacitance, "pF") => 1e-12,
        (Dimension::Capacitance, "F") => 1.0,
        (Dimension::Current, "nA") => 1e-9,
        (Dimension::Current, "uA" | "µA") => 1e-6,
        (Dimension::Current, "mA") => 1e-3,
        (Dimension::Current, "A") => 1.0,
        (Dimension::Flux, "Phi0") => phi0,
        (Dimension::Flux, "mPhi0") => 1e-3 * phi0,
        (Dimension::Flux, "uPhi0" | "µPhi0") => 1e-6 * phi0,
        (Dimension::Flux, "Wb") => 1.0,
        (Dimension::FluxOffset, "Phi0") => 1.0,
        (Dimension::FluxOffset, "mPhi0") => 1e-3,
        (Dimension::FluxOffset, "uPhi0" | "µPhi0") => 1e-6,
        (Dimension::FluxOffset, "Wb") => 1.0 / phi0,
        (Dimension::None, "") => 1.0,
        _ => return None,
    };
    Some(f)
}

/// Values of one entry: a scalar, a list `a, b, c` or a grid `start:stop:count`.
fn parse_values(text: &str, line: usize) -> Result<Vec<f64>, ConfigError> {
    let num = |s: &str| -> Result<f64, ConfigError> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| line_err(line, format!("malformed number `{}`", s.trim())))
    };
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(line_err(line, "grid must be `start:stop:count`"));
        }
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| line_err(line, "grid count must be a positive integer"))?;
        if n == 0 {
            return Err(line_err(line, "grid count must be positive"));
        }
        if n == 1 {
            return Ok(vec![a]);
        }
        let m = (n - 1) as f64;
        return Ok((0..n)
            .map(|i| (a * (m - i as f64) + b * i as f64) / m)
            .collect());
    }
    text.split(',').map(num).collect()
}

/// Split `value unit` where the unit is the trailing alphabetic token.
fn split_unit(text: &str) -> (&str, &str) {
    let t = text.trim();
    match t.rfind(|c: char| c.is_whitespace()) {
        Some(i)
            if t[i + 1..]
                .chars()
                .next()
                .is_some_and(|c| c.is_alphabetic() || c == 'µ') =>
        {
            (t[..i].trim(), &t[i + 1..])
        }
        _ => (t, ""),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub beta_c: Option<Vec<f64>>,
    /// Coupler flux offsets in Φ₀.
    pub coupler_offset: Option<Vec<f64>>,
    pub flux_mode: FluxMode,
    pub ratio: Option<Vec<f64>>,
    pub operating_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub circuit: CircuitParams<f64>,
    pub constants: PhysicalConstants<f64>,
    pub options: EvalOptions,
    pub extraction: Extraction,
    pub sweep: SweepSection,
    /// Significant digits of every emitted number.
    pub precision: usize,
    pub file: Option<String>,
}

pub const DEFAULT_PRECISION: usize = 12;

fn default_operating_grid() -> Vec<f64> {
    (0..14).map(|i| 0.05 + 0.05 * i as f64).collect()
}

#[derive(Default)]
struct Raw {
    l_j: [Option<f64>; 4],
    c_j: [Option<f64>; 4],
    i_cj: [Option<f64>; 4],
    beta_j: [Option<f64>; 4],
    m_j: [Option<f64>; 4],
    phi_jx: [Option<f64>; 4],
    l_c: Option<f64>,
    c_c: Option<f64>,
    i_cc: Option<f64>,
    beta_c: Option<f64>,
    phi_cx: Option<f64>,
}

fn set_per_qubit(slot: &mut [Option<f64>; 4], suffix: Option<usize>, v: f64) {
    match suffix {
        Some(j) => slot[j] = Some(v),
        None => slot.iter_mut().for_each(|s| *s = Some(v)),
    }
}

/// Split `L_j3` into (`L_j`, Some(2)); plain keys get None.
fn qubit_suffix(key: &str) -> (&str, Option<usize>) {
    if let Some(last) = key.chars().last() {
        if let Some(d) = last.to_digit(10) {
            let stem = &key[..key.len() - 1];
            if (1..=4).contains(&d) && (stem.ends_with('j') || stem == "Phi_jx") {
                return (stem, Some(d as usize - 1));
            }
        }
    }
    (key, None)
}

fn parse_bool(v: &str, line: usize) -> Result<bool, ConfigError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(line_err(line, format!("expected true or false, got `{v}`"))),
    }
}

fn parse_count(v: &str, line: usize) -> Result<usize, ConfigError> {
    v.parse()
        .map_err(|_| line_err(line, format!("expected a non-negative integer, got `{v}`")))
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let k = PhysicalConstants::si();
    let phi0 = k.flux_quantum;
    let mut raw = Raw::default();
    let mut truncation = Truncation::default();
    let mut options = EvalOptions::default();
    let mut fit = FitOptions::<f64>::default();
    let mut gap_threshold = DEFAULT_GAP_THRESHOLD;
    let mut extraction = Extraction::SpectralFit;
    let mut sweep = SweepSection {
        beta_c: None,
        coupler_offset: None,
        flux_mode: FluxMode::CouplerOnly,
        ratio: None,
        operating_grid: default_operating_grid(),
    };
    let mut flux_mode_name = "coupler_only".to_string();
    let mut qubit_offsets: Option<[f64; 4]> = None;
    let mut precision = DEFAULT_PRECISION;
    let mut file = None;
    let mut section = String::new();

    for (idx, full) in text.lines().enumerate() {
        let line = idx + 1;
        let body = full.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if body.starts_with('[') {
            if !body.ends_with(']') {
                return Err(line_err(line, "malformed section header"));
            }
            section = body[1..body.len() - 1].trim().to_string();
            if !["circuit", "truncation", "sweep", "extraction", "output"]
                .contains(&section.as_str())
            {
                return Err(line_err(line, format!("unknown section `{section}`")));
            }
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(line_err(line, "expected `key = value`"));
        };
        let (key, value) = (key.trim(), value.trim());
        let (number, unit) = split_unit(value);
        let quantity = |dim: Dimension| -> Result<Vec<f64>, ConfigError> {
            let vals = parse_values(number, line)?;
            if dim != Dimension::None && unit.is_empty() {
                return Err(line_err(line, format!("`{key}` needs a unit")));
            }
            let f = unit_factor(dim, unit, phi0)
                .ok_or_else(|| line_err(line, format!("unit `{unit}` not valid for `{key}`")))?;
            Ok(vals.into_iter().map(|v| v * f).collect())
        };
        let scalar = |dim: Dimension| -> Result<f64, ConfigError> {
            let v = quantity(dim)?;
            if v.len() != 1 {
                return Err(line_err(line, format!("`{key}` takes a single value")));
            }
            Ok(v[0])
        };
        let unknown = || line_err(line, format!("unknown key `{key}` in [{section}]"));
        match section.as_str() {
            "circuit" => {
                let (stem, j) = qubit_suffix(key);
                match stem {
                    "L_j" => set_per_qubit(&mut raw.l_j, j, scalar(Dimension::Inductance)?),
                    "C_j" => set_per_qubit(&mut raw.c_j, j, scalar(Dimension::Capacitance)?),
                    "I_cj" => set_per_qubit(&mut raw.i_cj, j, scalar(Dimension::Current)?),
                    "beta_j" => set_per_qubit(&mut raw.beta_j, j, scalar(Dimension::None)?),
                    "M_j" => set_per_qubit(&mut raw.m_j, j, scalar(Dimension::Inductance)?),
                    "Phi_jx" => set_per_qubit(&mut raw.phi_jx, j, scalar(Dimension::Flux)?),
                    "L_c" if j.is_none() => raw.l_c = Some(scalar(Dimension::Inductance)?),
                    "C_c" if j.is_none() => raw.c_c = Some(scalar(Dimension::Capacitance)?),
                    "I_cc" if j.is_none() => raw.i_cc = Some(scalar(Dimension::Current)?),
                    "beta_c" if j.is_none() => raw.beta_c = Some(scalar(Dimension::None)?),
                    "Phi_cx" if j.is_none() => raw.phi_cx = Some(scalar(Dimension::Flux)?),
                    _ => return Err(unknown()),
                }
            }
            "truncation" => match key {
                "qubit_states" => truncation.qubit_states = parse_count(value, line)?,
                "coupler_states" => truncation.coupler_states = parse_count(value, line)?,
                "n_keep" => truncation.coupler_keep = parse_count(value, line)?,
                "swt_keep" => options.swt_keep = parse_count(value, line)?,
                _ => return Err(unknown()),
            },
            "sweep" => match key {
                "beta_c" => sweep.beta_c = Some(quantity(Dimension::None)?),
                "coupler_offset" => sweep.coupler_offset = Some(quantity(Dimension::FluxOffset)?),
                "ratio" => sweep.ratio = Some(quantity(Dimension::None)?),
                "operating_grid" => sweep.operating_grid = quantity(Dimension::None)?,
                "flux_mode" => match value {
                    "coupler_only" | "common_mode" | "fixed_qubits" => {
                        flux_mode_name = value.to_string()
                    }
                    _ => return Err(line_err(line, format!("unknown flux_mode `{value}`"))),
                },
                "qubit_offsets" => {
                    let v = quantity(Dimension::FluxOffset)?;
                    if v.len() != 4 {
                        return Err(line_err(line, "qubit_offsets needs four values"));
                    }
                    qubit_offsets = Some(std::array::from_fn(|j| v[j]));
                }
                _ => return Err(unknown()),
            },
            "extraction" => match key {
                "branches" => {
                    extraction = match value {
                        "spectral_fit" => Extraction::SpectralFit,
                        "analytic_swt" => Extraction::AnalyticSwt,
                        "numerical_swt" => Extraction::NumericalSwt,
                        "all" => Extraction::All,
                        _ => return Err(line_err(line, format!("unknown branch `{value}`"))),
                    }
                }
                "max_residual" => fit.max_residual = scalar(Dimension::None)?,
                "fit_j1" => fit.fit_j1 = parse_bool(value, line)?,
                "fit_j3" => fit.fit_j3 = parse_bool(value, line)?,
                "gap_threshold" => gap_threshold = scalar(Dimension::None)?,
                _ => return Err(unknown()),
            },
            "output" => match key {
                "precision" => {
                    precision = parse_count(value, line)?;
                    if !(1..=17).contains(&precision) {
                        return Err(line_err(line, "precision must be within 1..=17"));
                    }
                }
                "file" => file = Some(value.to_string()),
                _ => return Err(unknown()),
            },
            _ => return Err(line_err(line, format!("`{key}` outside any section"))),
        }
    }

    sweep.flux_mode = match flux_mode_name.as_str() {
        "common_mode" => FluxMode::CommonMode,
        "fixed_qubits" => FluxMode::FixedQubits(
            qubit_offsets.ok_or_else(|| ConfigError::Missing("sweep.qubit_offsets".into()))?,
        ),
        _ => FluxMode::CouplerOnly,
    };
    for (name, grid) in [
        ("beta_c", &sweep.beta_c),
        ("coupler_offset", &sweep.coupler_offset),
        ("ratio", &sweep.ratio),
    ] {
        if let Some(g) = grid {
            check_grid(g).map_err(|e| ConfigError::Invalid(format!("sweep.{name}: {e}")))?;
        }
    }
    check_grid(&sweep.operating_grid)
        .map_err(|e| ConfigError::Invalid(format!("sweep.operating_grid: {e}")))?;
    options.truncation = truncation;
    options.fit = fit;
    options.gap_threshold = gap_threshold;
    let circuit = resolve_circuit(&raw, &k)?;
    Ok(RunConfig {
        circuit,
        constants: k,
        options,
        extraction,
        sweep,
        precision,
        file,
    })
}

fn resolve_circuit(
    raw: &Raw,
    k: &PhysicalConstants<f64>,
) -> Result<CircuitParams<f64>, ConfigError> {
    fn need4(slot: &[Option<f64>; 4], name: &str) -> Result<[f64; 4], ConfigError> {
        let mut out = [0.0; 4];
        for j in 0..4 {
            out[j] =
                slot[j].ok_or_else(|| ConfigError::Missing(format!("circuit.{name}{}", j + 1)))?;
        }
        Ok(out)
    }
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| ConfigError::Missing(format!("circuit.{name}")))
    };
    let l_j = need4(&raw.l_j, "L_j")?;
    let mut i_cj = [0.0; 4];
    for j in 0..4 {
        i_cj[j] = match (raw.i_cj[j], raw.beta_j[j]) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid(format!(
                    "qubit {}: give either I_cj or beta_j, not both",
                    j + 1
                )))
            }
            (Some(i), None) => i,
            (None, Some(b)) => critical_current_for_beta(b, l_j[j], k),
            (None, None) => {
                return Err(ConfigError::Missing(format!(
                    "circuit.I_cj{} (or beta_j{})",
                    j + 1,
                    j + 1
                )))
            }
        };
    }
    let mut p = CircuitParams {
        qubit_inductance: l_j,
        qubit_capacitance: need4(&raw.c_j, "C_j")?,
        qubit_critical_current: i_cj,
        mutual_inductance: need4(&raw.m_j, "M_j")?,
        coupler_inductance: need(raw.l_c, "L_c")?,
        coupler_capacitance: need(raw.c_c, "C_c")?,
        coupler_critical_current: 1.0,
        coupler_flux: raw.phi_cx.unwrap_or(0.5 * k.flux_quantum),
        qubit_flux: std::array::from_fn(|j| raw.phi_jx[j].unwrap_or(0.5 * k.flux_quantum)),
    };
    p.coupler_critical_current = match (raw.i_cc, raw.beta_c) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid(
                "give either I_cc or beta_c, not both".into(),
            ))
        }
        (Some(i), None) => i,
        (None, Some(b)) => {
            let d = derive_unitless(&p, k).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            critical_current_for_beta(b, d.params.l_tilde_c, k)
        }
        (None, None) => return Err(ConfigError::Missing("circuit.I_cc (or beta_c)".into())),
    };
    derive_unitless(&p, k).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(p)
}

fn list(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl RunConfig {
    /// Canonical text (SI units, shortest round-trip numbers) that parses back
    /// to an identical configuration.
    pub fn to_config_text(&self) -> String {
        let c = &self.circuit;
        let mut s = String::new();
        let _ = writeln!(s, "[circuit]");
        for j in 0..4 {
            let n = j + 1;
            let _ = writeln!(s, "L_j{n} = {:e} H", c.qubit_inductance[j]);
            let _ = writeln!(s, "C_j{n} = {:e} F", c.qubit_capacitance[j]);
            let _ = writeln!(s, "I_cj{n} = {:e} A", c.qubit_critical_current[j]);
            let _ = writeln!(s, "M_j{n} = {:e} H", c.mutual_inductance[j]);
            let _ = writeln!(s, "Phi_jx{n} = {:e} Wb", c.qubit_flux[j]);
        }
        let _ = writeln!(s, "L_c = {:e} H", c.coupler_inductance);
        let _ = writeln!(s, "C_c = {:e} F", c.coupler_capacitance);
        let _ = writeln!(s, "I_cc = {:e} A", c.coupler_critical_current);
        let _ = writeln!(s, "Phi_cx = {:e} Wb", c.coupler_flux);
        let t = &self.options.truncation;
        let _ = writeln!(s, "[truncation]");
        let _ = writeln!(s, "qubit_states = {}", t.qubit_states);
        let _ = writeln!(s, "coupler_states = {}", t.coupler_states);
        let _ = writeln!(s, "n_keep = {}", t.coupler_keep);
        let _ = writeln!(s, "swt_keep = {}", self.options.swt_keep);
        let _ = writeln!(s, "[sweep]");
        if let Some(g) = &self.sweep.beta_c {
            let _ = writeln!(s, "beta_c = {}", list(g));
        }
        if let Some(g) = &self.sweep.coupler_offset {
            let _ = writeln!(s, "coupler_offset = {} Phi0", list(g));
        }
        if let Some(g) = &self.sweep.ratio {
            let _ = writeln!(s, "ratio = {}", list(g));
        }
        let _ = writeln!(s, "operating_grid = {}", list(&self.sweep.operating_grid));
        match self.sweep.flux_mode {
            FluxMode::CouplerOnly => {
                let _ = writeln!(s, "flux_mode = coupler_only");
            }
            FluxMode::CommonMode => {
                let _ = writeln!(s, "flux_mode = common_mode");
            }
            FluxMode::FixedQubits(off) => {
                let _ = writeln!(s, "flux_mode = fixed_qubits");
                let _ = writeln!(s, "qubit_offsets = {} Phi0", list(&off));
            }
        }
        let f = &self.options.fit;
        let _ = writeln!(s, "[extraction]");
        let branch = match self.extraction {
            Extraction::SpectralFit => "spectral_fit",
            Extraction::AnalyticSwt => "analytic_swt",
            Extraction::NumericalSwt => "numerical_swt",
            Extraction::All => "all",
        };
        let _ = writeln!(s, "branches = {branch}");
        let _ = writeln!(s, "max_residual = {:e}", f.max_residual);
        let _ = writeln!(s, "fit_j1 = {}", f.fit_j1);
        let _ = writeln!(s, "fit_j3 = {}", f.fit_j3);
        let _ = writeln!(s, "gap_threshold = {:e}", self.options.gap_threshold);
        let _ = writeln!(s, "[output]");
        let _ = writeln!(s, "precision = {}", self.precision);
        if let Some(file) = &self.file {
            let _ = writeln!(s, "file = {file}");
        }
        s
    }

    pub fn truncation(&self) -> Truncation {
        self.options.truncation
    }
}
