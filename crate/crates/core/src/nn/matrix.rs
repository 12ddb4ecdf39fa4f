use crate::error::{check_len, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix used for mini-batches: one record per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        check_len("matrix data", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn row_vector(data: &[S]) -> Self {
        Self {
            rows: 1,
            cols: data.len(),
            data: data.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }

    /// Copies `src` (rows x k) into columns `[col, col + k)`.
    pub fn set_columns(&mut self, col: usize, src: &Matrix<S>) -> Result<()> {
        check_len("column block rows", self.rows, src.rows)?;
        if col + src.cols > self.cols {
            return Err(crate::Error::Shape {
                context: "column block width",
                expected: self.cols - col,
                got: src.cols,
            });
        }
        for r in 0..self.rows {
            self.data[r * self.cols + col..r * self.cols + col + src.cols]
                .copy_from_slice(src.row(r));
        }
        Ok(())
    }

    /// Extracts columns `[col, col + k)` into a new matrix.
    pub fn columns(&self, col: usize, k: usize) -> Matrix<S> {
        let mut out = Matrix::zeros(self.rows, k);
        for r in 0..self.rows {
            out.row_mut(r)
                .copy_from_slice(&self.data[r * self.cols + col..r * self.cols + col + k]);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}
