//! Integer matrix types for quantized GEMM and their plain-text format.
//!
//! The text format is a header line `rows cols` followed by `rows * cols`
//! whitespace-separated integers in row-major order. Line breaks inside the
//! body are not significant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Read-only element access shared by the INT8 and INT32 matrices.
pub trait IntMatrix {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn at(&self, row: usize, col: usize) -> i64;
}

/// Signed 8-bit matrix with a per-tensor scale tag.
///
/// The scale is carried for bookkeeping only; no integer arithmetic in this
/// crate reads it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i8>,
    scale: f32,
}

impl QuantMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<i8>) -> Result<Self> {
        check_shape(rows, cols, data.len())?;
        Ok(Self {
            rows,
            cols,
            data,
            scale: 1.0,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
            scale: 1.0,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    pub fn from_rows<R: AsRef<[i8]>>(rows: &[R]) -> Result<Self> {
        let (r, c, data) = flatten(rows)?;
        Self::new(r, c, data)
    }

    pub fn with_scale(mut self, scale: f32) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidMatrix(format!(
                "scale must be positive and finite, got {scale}"
            )));
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn scale(&self) -> f32 {
        self.scale
    }

    pub fn data(&self) -> &[i8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[i8] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }
}

impl IntMatrix for QuantMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn at(&self, row: usize, col: usize) -> i64 {
        i64::from(self.get(row, col))
    }
}

/// Signed 32-bit GEMM output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccumMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i32>,
}

impl AccumMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<i32>) -> Result<Self> {
        check_shape(rows, cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[i32]>>(rows: &[R]) -> Result<Self> {
        let (r, c, data) = flatten(rows)?;
        Self::new(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [i32] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> i32 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: i32) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[i32] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }
}

impl IntMatrix for AccumMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn at(&self, row: usize, col: usize) -> i64 {
        i64::from(self.get(row, col))
    }
}

/// Which all-ones reduction a checksum vector holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `e^T M`: one entry per column, each the sum of that column.
    Row,
    /// `M e`: one entry per row, each the sum of that row.
    Column,
}

/// Exact checksum sums held in 64-bit accumulators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecksumVector {
    side: Side,
    data: Vec<i64>,
}

impl ChecksumVector {
    pub fn new(side: Side, data: Vec<i64>) -> Self {
        Self { side, data }
    }

    pub fn zeros(side: Side, len: usize) -> Self {
        Self {
            side,
            data: vec![0; len],
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.data
    }

    pub fn get(&self, i: usize) -> i64 {
        self.data[i]
    }

    /// Sum of all entries, widened so it cannot overflow.
    pub fn total(&self) -> i128 {
        self.data.iter().map(|&v| i128::from(v)).sum()
    }

    pub(crate) fn data_mut(&mut self) -> &mut [i64] {
        &mut self.data
    }
}

fn check_shape(rows: usize, cols: usize, len: usize) -> Result<()> {
    match rows.checked_mul(cols) {
        Some(n) if n == len => Ok(()),
        _ => Err(Error::InvalidMatrix(format!(
            "{rows}x{cols} matrix needs {} elements, got {len}",
            rows.saturating_mul(cols)
        ))),
    }
}

fn flatten<T: Copy, R: AsRef<[T]>>(rows: &[R]) -> Result<(usize, usize, Vec<T>)> {
    let cols = rows.first().map_or(0, |r| r.as_ref().len());
    let mut data = Vec::with_capacity(rows.len() * cols);
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != cols {
            return Err(Error::InvalidMatrix(format!(
                "row {i} has {} elements, expected {cols}",
                r.len()
            )));
        }
        data.extend_from_slice(r);
    }
    Ok((rows.len(), cols, data))
}

/// Parses the text format into a shape and a flat list of values.
fn parse_text(s: &str) -> Result<(usize, usize, Vec<(usize, i64)>)> {
    let mut lines = s
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing `rows cols` header".into(),
    })?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(Error::Parse {
            line: hline,
            message: format!("header must be `rows cols`, got {header:?}"),
        });
    }
    let parse_dim = |t: &str| {
        t.parse::<usize>().map_err(|e| Error::Parse {
            line: hline,
            message: format!("bad dimension {t:?}: {e}"),
        })
    };
    let rows = parse_dim(dims[0])?;
    let cols = parse_dim(dims[1])?;

    let mut values = Vec::with_capacity(rows * cols);
    for (line, body) in lines {
        for tok in body.split_whitespace() {
            let v = tok.parse::<i64>().map_err(|e| Error::Parse {
                line,
                message: format!("bad integer {tok:?}: {e}"),
            })?;
            values.push((line, v));
        }
    }
    if values.len() != rows * cols {
        return Err(Error::Parse {
            line: values.last().map_or(hline, |(l, _)| *l),
            message: format!(
                "expected {} values for a {rows}x{cols} matrix, found {}",
                rows * cols,
                values.len()
            ),
        });
    }
    Ok((rows, cols, values))
}

fn narrow<T: TryFrom<i64>>(values: Vec<(usize, i64)>, what: &str) -> Result<Vec<T>> {
    values
        .into_iter()
        .map(|(line, v)| {
            T::try_from(v).map_err(|_| Error::Parse {
                line,
                message: format!("{v} does not fit in {what}"),
            })
        })
        .collect()
}

impl FromStr for QuantMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (rows, cols, values) = parse_text(s)?;
        Self::new(rows, cols, narrow(values, "a signed 8-bit integer")?)
    }
}

impl FromStr for AccumMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (rows, cols, values) = parse_text(s)?;
        Self::new(rows, cols, narrow(values, "a signed 32-bit integer")?)
    }
}

fn write_text<T: fmt::Display>(
    f: &mut fmt::Formatter<'_>,
    rows: usize,
    cols: usize,
    data: &[T],
) -> fmt::Result {
    writeln!(f, "{rows} {cols}")?;
    for r in 0..rows {
        let row = &data[r * cols..(r + 1) * cols];
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        writeln!(f)?;
    }
    Ok(())
}

impl fmt::Display for QuantMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_text(f, self.rows, self.cols, &self.data)
    }
}

impl fmt::Display for AccumMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_text(f, self.rows, self.cols, &self.data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_text_format() {
        let m: QuantMatrix = "2 2\n1 2\n3 4\n".parse().unwrap();
        assert_eq!(m, QuantMatrix::from_rows(&[[1, 2], [3, 4]]).unwrap());

        // body line breaks are not significant
        let y: AccumMatrix = "2 3\n1 2 3 4\n5 6".parse().unwrap();
        assert_eq!(y.row(1), &[4, 5, 6]);
    }

    #[test]
    fn display_round_trips() {
        let m = QuantMatrix::from_rows(&[[-128, 127, 0], [5, -6, 7]]).unwrap();
        let back: QuantMatrix = m.to_string().parse().unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_out_of_range_int8_with_line() {
        let err = "2 2\n1 2\n3 200\n".parse::<QuantMatrix>().unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_wrong_element_count() {
        assert!("2 2\n1 2 3\n".parse::<AccumMatrix>().is_err());
        assert!("".parse::<AccumMatrix>().is_err());
        assert!("2\n1 2".parse::<AccumMatrix>().is_err());
        assert!(AccumMatrix::new(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows: Vec<Vec<i8>> = vec![vec![1, 2], vec![3]];
        assert!(QuantMatrix::from_rows(&rows).is_err());
    }

    #[test]
    fn scale_must_be_positive() {
        assert!(QuantMatrix::zeros(1, 1).with_scale(0.0).is_err());
        assert_eq!(QuantMatrix::zeros(1, 1).with_scale(0.5).unwrap().scale(), 0.5);
    }
}
