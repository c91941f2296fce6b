//! Deterministic CSV emission: `#`-prefixed self-describing header, fixed
//! scientific formatting, LF line endings.

use std::fmt::Write as _;

/// One CSV column: name and unit (empty for dimensionless or text).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub unit: &'static str,
}

impl Column {
    pub fn new(name: impl Into<String>, unit: &'static str) -> Self {
        Self {
            name: name.into(),
            unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Int(b as i64)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

/// Scientific notation with `precision` significant digits; non-finite as `nan`/`inf`.
pub fn format_number(x: f64, precision: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // Normalize −0 so that identical values print identically.
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{:.*e}", precision.saturating_sub(1), x)
}

fn format_cell(c: &Cell, precision: usize) -> String {
    match c {
        Cell::Num(x) => format_number(*x, precision),
        Cell::Int(n) => n.to_string(),
        Cell::Text(s) => s.clone(),
        Cell::Missing => "nan".into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Header (tool version, command, resolved configuration, column units)
    /// followed by the column names and rows.
    pub fn render(
        &self,
        command: &str,
        config_text: &str,
        notes: &[String],
        precision: usize,
    ) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# {} {}",
            env!("CARGO_PKG_NAME"),
            env!("CARGO_PKG_VERSION")
        );
        let _ = writeln!(s, "# command: {command}");
        let _ = writeln!(s, "# config:");
        for line in config_text.lines() {
            let _ = writeln!(s, "#   {line}");
        }
        if !notes.is_empty() {
            let _ = writeln!(s, "# notes:");
            for n in notes {
                let _ = writeln!(s, "#   {n}");
            }
        }
        let _ = writeln!(s, "# units:");
        for c in &self.columns {
            let unit = if c.unit.is_empty() { "-" } else { c.unit };
            let _ = writeln!(s, "#   {} [{unit}]", c.name);
        }
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        let _ = writeln!(s, "{}", names.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| format_cell(c, precision)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}
