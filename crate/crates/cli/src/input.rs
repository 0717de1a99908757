//! CSV readers for p-value tables and replicate matrices.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{CliError, CliResult};

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_all(path: &Path) -> CliResult<String> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
    Ok(text)
}

fn parse_number(field: &str, what: &str, line: u64) -> CliResult<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| CliError::Data(format!("line {line}: {what} `{field}` is not a number")))
}

/// A p-value table with an optional weight column.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueTable {
    pub pvalues: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

/// Reads a headed CSV with a `pvalue` column and an optional `weight` column.
pub fn read_pvalues(path: &Path) -> CliResult<PValueTable> {
    let text = read_all(path)?;
    if text.trim().is_empty() {
        return Err(CliError::Usage(format!("{} is empty", path.display())));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let p_col = column("pvalue").ok_or_else(|| {
        CliError::Usage(format!("{} has no `pvalue` column", path.display()))
    })?;
    let w_col = column("weight");
    let mut pvalues = Vec::new();
    let mut weights = w_col.map(|_| Vec::new());
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize| {
            record
                .get(col)
                .ok_or_else(|| CliError::Data(format!("line {line}: missing column {}", col + 1)))
        };
        let p = parse_number(field(p_col)?, "pvalue", line)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::Data(format!("line {line}: pvalue {p} is outside [0, 1]")));
        }
        pvalues.push(p);
        if let (Some(col), Some(ws)) = (w_col, weights.as_mut()) {
            let w = parse_number(field(col)?, "weight", line)?;
            if !(w.is_finite() && w >= 0.0) {
                return Err(CliError::Data(format!("line {line}: weight {w} must be finite and nonnegative")));
            }
            ws.push(w);
        }
    }
    if pvalues.is_empty() {
        return Err(CliError::Usage(format!("{} has a header but no rows", path.display())));
    }
    Ok(PValueTable { pvalues, weights })
}

/// Reads a weight column from a headed CSV (used by the `weights_path` parameter).
pub fn read_weights(path: &Path) -> CliResult<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = reader.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("weight"))
        .ok_or_else(|| CliError::Usage(format!("{} has no `weight` column", path.display())))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = record
            .get(col)
            .ok_or_else(|| CliError::Data(format!("line {line}: missing weight")))?;
        out.push(parse_number(field, "weight", line)?);
    }
    Ok(out)
}

/// Reads a headerless `K x n` numeric matrix, one hypothesis per row.
pub fn read_replicates(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let text = read_all(path)?;
    if text.trim().is_empty() {
        return Err(CliError::Usage(format!("{} is empty", path.display())));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|f| {
                let v = parse_number(f, "value", line)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(CliError::Data(format!("line {line}: value {v} is not finite")))
                }
            })
            .collect::<CliResult<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CliError::Data(format!(
                    "line {line}: ragged row with {} values, expected {}",
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}
