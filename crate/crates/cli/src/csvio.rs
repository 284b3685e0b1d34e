//! CSV input and output.
//!
//! Numbers are written in scientific notation with 17 significant digits,
//! which reproduces every `f64` exactly when read back.

use std::io::Write;
use std::path::Path;

use ranksel_core::models::Dataset;
use ranksel_core::ranksum::LossPanel;

use crate::CliError;

pub const PANEL_PREFIX: &str = "model_";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Table {
    headers: Vec<String>,
    /// `(line number, cells)` per data row.
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{}: header: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.iter().all(String::is_empty) {
        return Err(CliError::Data(format!("{}: missing header row", path.display())));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Data(format!("{}: line {line}: {e}", path.display()))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != headers.len() {
            return Err(CliError::Data(format!(
                "{}: line {line}: expected {} fields, found {}",
                path.display(),
                headers.len(),
                rec.len()
            )));
        }
        rows.push((line, rec.iter().map(|c| c.trim().to_string()).collect()));
    }
    Ok(Table { headers, rows })
}

fn cell(path: &Path, table: &Table, row: usize, col: usize) -> Result<f64, CliError> {
    let (line, cells) = &table.rows[row];
    let raw = &cells[col];
    let v: f64 = raw.parse().map_err(|_| {
        CliError::Data(format!(
            "{}: line {line}, column {:?}: not a number: {raw:?}",
            path.display(),
            table.headers[col]
        ))
    })?;
    if !v.is_finite() {
        return Err(CliError::Data(format!(
            "{}: line {line}, column {:?}: non-finite value {raw:?}",
            path.display(),
            table.headers[col]
        )));
    }
    Ok(v)
}

/// Reads a regression dataset; every column other than `response` is a feature.
pub fn read_dataset(path: &Path, response: &str) -> Result<(Dataset, Vec<String>), CliError> {
    let table = read_table(path)?;
    let Some(ycol) = table.headers.iter().position(|h| h == response) else {
        return Err(CliError::Usage(format!(
            "--response: column {response:?} not found in {} (columns: {})",
            path.display(),
            table.headers.join(", ")
        )));
    };
    if table.headers.len() < 2 {
        return Err(CliError::Data(format!("{}: no feature columns", path.display())));
    }
    let features: Vec<String> = table
        .headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != ycol)
        .map(|(_, h)| h.clone())
        .collect();
    let mut x_rows = Vec::with_capacity(table.rows.len());
    let mut y = Vec::with_capacity(table.rows.len());
    for r in 0..table.rows.len() {
        let mut row = Vec::with_capacity(features.len());
        for c in 0..table.headers.len() {
            let v = cell(path, &table, r, c)?;
            if c == ycol {
                y.push(v);
            } else {
                row.push(v);
            }
        }
        x_rows.push(row);
    }
    Ok((Dataset::from_rows(&x_rows, y)?, features))
}

/// Reads a loss panel: one column per model, one row per evaluation point.
/// A `model_` prefix on headers is stripped to recover the model id.
pub fn read_panel(path: &Path) -> Result<LossPanel, CliError> {
    let table = read_table(path)?;
    if table.headers.len() < 2 {
        return Err(CliError::Usage(format!(
            "{}: a loss panel needs at least 2 model columns, found {}",
            path.display(),
            table.headers.len()
        )));
    }
    let mut cols = vec![Vec::with_capacity(table.rows.len()); table.headers.len()];
    for r in 0..table.rows.len() {
        for (c, col) in cols.iter_mut().enumerate() {
            col.push(cell(path, &table, r, c)?);
        }
    }
    let ids = table
        .headers
        .iter()
        .map(|h| h.strip_prefix(PANEL_PREFIX).unwrap_or(h).to_string())
        .collect();
    LossPanel::new(cols, ids).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_panel(path: &Path, panel: &LossPanel) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Data(e.to_string()))?;
    let header: Vec<String> = panel
        .model_ids()
        .iter()
        .map(|id| format!("{PANEL_PREFIX}{id}"))
        .collect();
    w.write_record(&header).map_err(|e| CliError::Data(e.to_string()))?;
    for i in 0..panel.n_obs() {
        let row: Vec<String> = (0..panel.n_models()).map(|j| fmt_f64(panel.column(j)[i])).collect();
        w.write_record(&row).map_err(|e| CliError::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `header` and `rows` as CSV.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Data(e.to_string()))?;
    w.write_record(header).map_err(|e| CliError::Data(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated plot data with a `#` header line.
pub fn write_dat(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# {}", header.join(" "))?;
    for r in rows {
        writeln!(f, "{}", r.join(" "))?;
    }
    f.flush()?;
    Ok(())
}
