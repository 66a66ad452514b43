//! Matrix file formats.
//!
//! CSV: one matrix row per line, comma-separated decimal values, with an
//! optional `# rows cols` header line. Values are written with Rust's
//! shortest round-trip float formatting, so write → read is lossless.
//!
//! JSON: `{"rows": r, "cols": c, "data": [...]}` with `data` flat row-major.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{NmfError, Result};
use crate::matrix::DenseMatrix;

/// Parses the CSV matrix format. Blank lines and `#` comments other than a
/// leading `# rows cols` header are ignored; ragged rows are rejected.
pub fn parse_csv(text: &str) -> Result<DenseMatrix> {
    let mut header: Option<(usize, usize)> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if header.is_none() && rows.is_empty() {
                let parts: Vec<&str> = comment.split_whitespace().collect();
                if let [r, c] = parts.as_slice() {
                    if let (Ok(r), Ok(c)) = (r.parse(), c.parse()) {
                        header = Some((r, c));
                    }
                }
            }
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| {
                    NmfError::Parse(format!("line {}: '{}': {e}", lineno + 1, tok.trim()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(NmfError::Parse(format!(
                    "line {}: ragged row with {} values, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let m = DenseMatrix::from_rows(&rows)?;
    if let Some((r, c)) = header {
        if (r, c) != m.shape() && !(r * c == 0 && m.is_empty()) {
            return Err(NmfError::Parse(format!(
                "header declares {r}x{c} but data is {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if m.rows() == 0 {
            return Ok(DenseMatrix::zeros(r, c));
        }
    }
    Ok(m)
}

pub fn to_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {} {}", m.rows(), m.cols());
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_json(text: &str) -> Result<DenseMatrix> {
    Ok(serde_json::from_str(text)?)
}

pub fn to_json(m: &DenseMatrix) -> String {
    serde_json::to_string(m).expect("matrix serializes")
}

/// Parses either format, sniffing JSON by a leading `{`.
pub fn parse_any(text: &str) -> Result<DenseMatrix> {
    if text.trim_start().starts_with('{') {
        parse_json(text)
    } else {
        parse_csv(text)
    }
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    parse_any(&std::fs::read_to_string(path)?)
}

pub fn read_matrix_from(mut reader: impl Read) -> Result<DenseMatrix> {
    let mut s = String::new();
    reader.read_to_string(&mut s)?;
    parse_any(&s)
}

pub fn write_csv(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    std::fs::write(path, to_csv(m))?;
    Ok(())
}

pub fn write_csv_to(mut w: impl Write, m: &DenseMatrix) -> Result<()> {
    w.write_all(to_csv(m).as_bytes())?;
    Ok(())
}

/// Writes 2-D points as a two-column CSV with an `x,y` header.
pub fn points_csv(points: &[[f64; 2]]) -> String {
    let mut out = String::from("x,y\n");
    for p in points {
        let _ = writeln!(out, "{},{}", p[0], p[1]);
    }
    out
}
