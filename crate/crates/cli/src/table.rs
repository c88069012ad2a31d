//! Two-column CSV input and fixed-precision CSV output.

use std::fmt::Write as _;
use std::path::Path;

use esn2::Dataset;

use crate::CliError;

/// Reads `y1,y2` rows. A first row whose cells are not all numeric is taken as a header.
pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(None)
        .from_path(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let (mut y1, mut y2) = (Vec::new(), Vec::new());
    for (k, record) in reader.records().enumerate() {
        let line = k + 1;
        let record = record.map_err(|e| CliError::usage(format!("{}: row {line}: {e}", path.display())))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 2 {
            return Err(CliError::usage(format!(
                "{}: row {line}: expected 2 columns, found {}",
                path.display(),
                record.len()
            )));
        }
        let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse::<f64>().ok()).collect();
        if k == 0 && parsed.iter().all(Option::is_none) {
            continue;
        }
        let mut cells = [0.0; 2];
        for (c, (cell, value)) in record.iter().zip(parsed).enumerate() {
            match value {
                Some(v) if v.is_finite() => cells[c] = v,
                Some(_) => {
                    return Err(CliError::usage(format!(
                        "{}: row {line}, column {}: value '{cell}' is not finite",
                        path.display(),
                        c + 1
                    )))
                }
                None => {
                    return Err(CliError::usage(format!(
                        "{}: row {line}, column {}: '{cell}' is not a number",
                        path.display(),
                        c + 1
                    )))
                }
            }
        }
        y1.push(cells[0]);
        y2.push(cells[1]);
    }
    if y1.is_empty() {
        return Err(CliError::usage(format!("{}: no data rows", path.display())));
    }
    Dataset::new(y1, y2).map_err(|e| CliError::usage(e.to_string()))
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_num(v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}
