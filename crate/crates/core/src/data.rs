//! Dataset storage and CSV ingestion.
//!
//! Covariates are stored row-major; the design vector x_i = (1, z_i) is
//! materialized on demand. Column views are extracted into caller buffers so
//! the per-covariate selection scans stay cache-friendly.

use crate::error::{Error, Result};
use std::io::Read;
use std::path::Path;

/// Immutable N×p covariate matrix plus response vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    z: Vec<f64>, // row-major n x p
    y: Vec<f64>,
}

impl Dataset {
    /// Build from a row-major covariate buffer and a response vector,
    /// rejecting any non-finite entry.
    pub fn new(n: usize, p: usize, z: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::EmptyData);
        }
        if z.len() != n * p {
            return Err(Error::DimensionMismatch {
                what: "covariate matrix",
                expected: n * p,
                actual: z.len(),
            });
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                what: "response vector",
                expected: n,
                actual: y.len(),
            });
        }
        for (idx, &v) in z.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "covariate",
                    row: idx / p,
                    col: idx % p,
                });
            }
        }
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "response",
                    row: i,
                    col: 0,
                });
            }
        }
        Ok(Self { n, p, z, y })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn z(&self, i: usize, j: usize) -> f64 {
        self.z[i * self.p + j]
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.y[i]
    }

    #[inline]
    pub fn z_row(&self, i: usize) -> &[f64] {
        &self.z[i * self.p..(i + 1) * self.p]
    }

    /// Write the design vector x_i = (1, z_i) into `out` (length p+1).
    #[inline]
    pub fn design_row(&self, i: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.p + 1);
        out[0] = 1.0;
        out[1..].copy_from_slice(self.z_row(i));
    }

    /// Extract covariate column j into `out`, resizing as needed.
    pub fn copy_column_into(&self, j: usize, out: &mut Vec<f64>) {
        out.clear();
        out.reserve(self.n);
        for i in 0..self.n {
            out.push(self.z(i, j));
        }
    }

    /// Materialize the rows at `indices` as a new dataset (used by the
    /// bootstrap runner; duplicates are allowed there).
    pub fn take_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut z = Vec::with_capacity(indices.len() * self.p);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            z.extend_from_slice(self.z_row(i));
            y.push(self.y(i));
        }
        Self::new(indices.len(), self.p, z, y)
    }

    /// Parse a headered CSV. The column named `response_col` is the response;
    /// all other columns are covariates in header order. Any parse failure
    /// aborts with the offending line and column.
    pub fn from_csv_reader<R: Read>(reader: R, response_col: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let y_idx = headers
            .iter()
            .position(|h| h == response_col)
            .ok_or_else(|| Error::MissingResponseColumn {
                name: response_col.to_string(),
            })?;
        let p = headers.len() - 1;
        if p == 0 {
            return Err(Error::EmptyData);
        }
        let mut z = Vec::new();
        let mut y = Vec::new();
        let mut n = 0usize;
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            for (col, field) in record.iter().enumerate() {
                let value: f64 = field.parse().map_err(|e| Error::CsvParse {
                    line,
                    column: headers.get(col).unwrap_or("?").to_string(),
                    message: format!("{e}: `{field}`"),
                })?;
                if col == y_idx {
                    y.push(value);
                } else {
                    z.push(value);
                }
            }
            n += 1;
        }
        Self::new(n, p, z, y)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P, response_col: &str) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file), response_col)
    }
}
