//! Validated square system matrices and their CSV / JSON representations.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A validated n-by-n real matrix. Entries are finite and n >= 1.
///
/// Serialized as a row-major array of arrays in JSON configs, and as one
/// comma-separated row per line (no header) in CSV files.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSpec {
    inner: DMatrix<f64>,
}

impl MatrixSpec {
    /// Builds from row-major rows, validating shape and finiteness.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        let inner = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_dmatrix(inner)
    }

    pub fn from_dmatrix(inner: DMatrix<f64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.nrows() != inner.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "{}x{} is not a nonempty square shape",
                inner.nrows(),
                inner.ncols()
            )));
        }
        if inner.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self { inner })
    }

    pub fn scalar(a: f64) -> Result<Self> {
        Self::from_rows(&[vec![a]])
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    /// Mean of the entries (the element mean `a`).
    pub fn element_mean(&self) -> f64 {
        self.inner.iter().sum::<f64>() / (self.dim() * self.dim()) as f64
    }

    /// Population variance of the entries (the element variance).
    pub fn element_variance(&self) -> f64 {
        let a = self.element_mean();
        self.inner.iter().map(|x| (x - a) * (x - a)).sum::<f64>()
            / (self.dim() * self.dim()) as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.max_abs().max(1e-300);
        let n = self.dim();
        for i in 0..n {
            for j in (i + 1)..n {
                if (self.inner[(i, j)] - self.inner[(j, i)]).abs() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_nonnegative(&self) -> bool {
        self.inner.iter().all(|&x| x >= 0.0)
    }

    /// Parses the CSV form: one row per line, comma-separated, no header.
    /// Lines starting with `#` and blank lines are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|tok| tok.trim().parse::<f64>()).collect();
            match row {
                Ok(r) => rows.push(r),
                Err(e) => return Err(Error::InvalidMatrix(format!("bad CSV row: {e}"))),
            }
        }
        Self::from_rows(&rows)
    }

    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut out = String::new();
        for i in 0..n {
            for j in 0..n {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{}", self.inner[(i, j)]));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.inner[(i, j)]).collect()).collect()
    }
}

impl Serialize for MatrixSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MatrixSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        MatrixSpec::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}
