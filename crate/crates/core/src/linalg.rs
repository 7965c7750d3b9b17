//! Dense row-major matrices and the few kernels AMP needs.
//!
//! Every reduction here runs in a fixed order (ascending row, then ascending
//! column) so that centralized and distributed evaluations of the same sums
//! produce bit-identical results.

use std::ops::Range;

use crate::error::{check_len, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("matrix data", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_len("matrix row", cols, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn view(&self) -> MatrixView<'_> {
        MatrixView {
            rows: self.rows,
            cols: self.cols,
            data: &self.data,
        }
    }

    /// Borrow a contiguous band of rows.
    pub fn row_block(&self, range: Range<usize>) -> MatrixView<'_> {
        MatrixView {
            rows: range.len(),
            cols: self.cols,
            data: &self.data[range.start * self.cols..range.end * self.cols],
        }
    }
}

/// Borrowed band of rows from a [`Matrix`].
#[derive(Debug, Clone, Copy)]
pub struct MatrixView<'a> {
    rows: usize,
    cols: usize,
    data: &'a [f64],
}

impl<'a> MatrixView<'a> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `out[n] = Σ_i a[i][n]·z[i]`, accumulated over rows in ascending order.
    pub fn transpose_mul_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("transpose product (rows)", self.rows, z.len())?;
        check_len("transpose product (cols)", self.cols, out.len())?;
        out.fill(0.0);
        for (i, &zi) in z.iter().enumerate() {
            for (acc, &a) in out.iter_mut().zip(self.row(i)) {
                *acc += a * zi;
            }
        }
        Ok(())
    }

    pub fn transpose_mul(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.cols];
        self.transpose_mul_into(z, &mut out)?;
        Ok(out)
    }

    /// `A·x` for a vector given by its nonzero support (ascending indices).
    pub fn mul_sparse(&self, support: &[(usize, f64)]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                support.iter().fold(0.0, |acc, &(n, v)| acc + row[n] * v)
            })
            .collect()
    }
}

/// Nonzero entries of `x` as `(index, value)` pairs in ascending index order.
pub fn support(x: &[f64]) -> Vec<(usize, f64)> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(n, v)| (n, *v))
        .collect()
}

/// Number of entries that are not exactly zero.
pub fn l0_norm(x: &[f64]) -> usize {
    x.iter().filter(|v| **v != 0.0).count()
}

/// Sum of squares, ascending index order.
pub fn sum_squares(z: &[f64]) -> f64 {
    z.iter().fold(0.0, |acc, v| acc + v * v)
}
