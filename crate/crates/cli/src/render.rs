//! Plain-text tables, CSV and JSON output.

use std::io::Write;

use serde::Serialize;

use crate::{CliError, CliResult, Format};

/// Rows of already-formatted cells under a header.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) {
        self.rows.push(cells.into_iter().map(Into::into).collect());
    }

    /// Right-aligned columns, two spaces apart.
    pub fn write_text(&self, out: &mut dyn Write) -> CliResult {
        let mut width: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (i, c) in r.iter().enumerate() {
                if i < width.len() {
                    width[i] = width[i].max(c.chars().count());
                }
            }
        }
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&width)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        writeln!(out, "{}", line(&self.header))?;
        for r in &self.rows {
            writeln!(out, "{}", line(r))?;
        }
        Ok(())
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> CliResult {
        writeln!(out, "{}", csv_line(&self.header))?;
        for r in &self.rows {
            writeln!(out, "{}", csv_line(r))?;
        }
        Ok(())
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> CliResult {
        match format {
            Format::Csv => self.write_csv(out),
            _ => self.write_text(out),
        }
    }
}

pub fn csv_line(cells: &[String]) -> String {
    cells
        .iter()
        .map(|c| csv_field(c))
        .collect::<Vec<_>>()
        .join(",")
}

fn csv_field(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

/// Three decimals, the precision used for R and MOS in text output.
pub fn f3(v: f64) -> String {
    format!("{v:.3}")
}

/// Full precision for machine-readable text (CSV).
pub fn full(v: f64) -> String {
    format!("{v}")
}

/// Picks the numeric rendering for the format.
pub fn num(format: Format, v: f64) -> String {
    match format {
        Format::Table => f3(v),
        _ => full(v),
    }
}

pub fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::data(format!("serializing output: {e}")))?;
    writeln!(out, "{text}")?;
    Ok(())
}

pub fn write_json_line<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult {
    let text = serde_json::to_string(value)
        .map_err(|e| CliError::data(format!("serializing output: {e}")))?;
    writeln!(out, "{text}")?;
    Ok(())
}
