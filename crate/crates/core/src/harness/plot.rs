use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Two-column `(n, value)` series; the name is the file stem.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotTable {
    pub name: String,
    pub rows: Vec<(usize, f64)>,
}

impl PlotTable {
    pub fn new(name: impl Into<String>, rows: Vec<(usize, f64)>) -> Result<Self> {
        check_increasing(&rows)?;
        Ok(Self {
            name: name.into(),
            rows,
        })
    }

    /// Rows `(1, values[0]), (2, values[1]), ...`.
    pub fn from_values(name: impl Into<String>, values: &[f64]) -> Self {
        Self {
            name: name.into(),
            rows: values
                .iter()
                .enumerate()
                .map(|(i, v)| (i + 1, *v))
                .collect(),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.1).collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (n, v) in &self.rows {
            writeln!(out, "{n} {}", format_value(*v)).expect("writing to a String");
        }
        out
    }
}

/// Ten significant digits, always with a '.' decimal point.
pub fn format_value(v: f64) -> String {
    format!("{v:.9e}")
}

fn check_increasing(rows: &[(usize, f64)]) -> Result<()> {
    for w in rows.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::Format(format!(
                "n not increasing: {} after {}",
                w[1].0, w[0].0
            )));
        }
    }
    Ok(())
}

/// Writes `<dir>/<name>.table`.
pub fn write_plot_table(table: &PlotTable, dir: &Path) -> Result<()> {
    fs::write(dir.join(format!("{}.table", table.name)), table.render())?;
    Ok(())
}

pub fn read_plot_table(path: &Path) -> Result<PlotTable> {
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("expected `<n> <value>`, found {line:?}"),
        };
        let mut fields = line.split_whitespace();
        let n = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
        let v = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
        if fields.next().is_some() {
            return Err(bad());
        }
        rows.push((n, v));
    }
    PlotTable::new(name, rows)
}
