//! Plain-text and JSON matrix formats.
//!
//! Text: first line `rows cols`, then one line per row of decimal numbers
//! written with 17 significant digits. JSON: `{"rows":m,"cols":n,"data":[...]}`
//! with `data` in row-major order. Both round-trip bit-exactly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::spectral::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DenseMatrix> for MatrixJson {
    fn from(m: &DenseMatrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl TryFrom<&MatrixJson> for DenseMatrix {
    type Error = GeoError;

    fn try_from(j: &MatrixJson) -> Result<Self> {
        if j.data.len() != j.rows * j.cols {
            return Err(GeoError::Parse(format!(
                "expected {} entries for a {}x{} matrix, found {}",
                j.rows * j.cols,
                j.rows,
                j.cols,
                j.data.len()
            )));
        }
        Ok(DenseMatrix::from_row_slice(j.rows, j.cols, &j.data))
    }
}

pub fn to_text(m: &DenseMatrix) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:.16e}", m[(i, j)]))
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn from_text(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| GeoError::Parse("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| GeoError::Parse(format!("bad header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(GeoError::Parse(format!("bad header {header:?}")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| GeoError::Parse(format!("row {i}: {e}")))?;
        if row.len() != cols {
            return Err(GeoError::Parse(format!(
                "row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
        data.extend(row);
    }
    if data.len() != rows * cols {
        return Err(GeoError::Parse(format!(
            "expected {rows} rows, found {}",
            data.len() / cols.max(1)
        )));
    }
    Ok(DenseMatrix::from_row_slice(rows, cols, &data))
}

pub fn to_json(m: &DenseMatrix) -> String {
    serde_json::to_string(&MatrixJson::from(m)).expect("matrix serialization cannot fail")
}

pub fn from_json(text: &str) -> Result<DenseMatrix> {
    let j: MatrixJson = serde_json::from_str(text)?;
    DenseMatrix::try_from(&j)
}
