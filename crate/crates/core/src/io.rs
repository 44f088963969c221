//! File formats: numeric CSV matrices (plain comma-separated rows, no
//! header) and zero-pattern files (one 1-based "i,j" pair per line; the
//! diagonal is implied).

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::ZeroPattern;

/// Parses a rectangular numeric CSV into a matrix.
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row: Vec<f64> = trimmed
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("not a number: '{}'", tok.trim()),
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 0, msg: "empty matrix file".into() });
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix_csv(&std::fs::read_to_string(path)?)
}

/// Shortest round-trip decimal rendering, row per line.
pub fn format_matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", m[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, format_matrix_csv(m))?;
    Ok(())
}

/// Parses a pattern file: one "i,j" pair per line, 1-based; blank lines and
/// `#` comments are skipped; diagonal pairs are added automatically.
pub fn parse_pattern(text: &str, n: usize) -> Result<ZeroPattern> {
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split(',');
        let parse_idx = |tok: Option<&str>| -> Result<usize> {
            tok.map(str::trim)
                .filter(|t| !t.is_empty())
                .and_then(|t| t.parse::<usize>().ok())
                .ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected 'i,j' with positive integers, got '{trimmed}'"),
                })
        };
        let i = parse_idx(parts.next())?;
        let j = parse_idx(parts.next())?;
        if parts.next().is_some() {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("expected exactly two indices, got '{trimmed}'"),
            });
        }
        pairs.push((i, j));
    }
    ZeroPattern::from_pairs_one_based(n, pairs)
}

pub fn read_pattern(path: &Path, n: usize) -> Result<ZeroPattern> {
    parse_pattern(&std::fs::read_to_string(path)?, n)
}

/// Serializes a pattern as 1-based "i,j" lines in row-major order.
pub fn format_pattern(pattern: &ZeroPattern) -> String {
    let mut out = String::new();
    for (i, j) in pattern.entries_one_based() {
        let _ = writeln!(out, "{i},{j}");
    }
    out
}

pub fn write_pattern(path: &Path, pattern: &ZeroPattern) -> Result<()> {
    std::fs::write(path, format_pattern(pattern))?;
    Ok(())
}
