//! Compressed sparse row storage for feature matrices.

use nalgebra::DVector;

/// Row-major sparse matrix with zero-based column indices.
///
/// Rows are immutable once pushed; the column count may grow (padding with
/// implicit zeros) but never below the largest index already stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRowMatrix {
    cols: usize,
    /// `indptr[r]..indptr[r+1]` is the slice of row `r`.
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRowMatrix {
    pub fn new(cols: usize) -> Self {
        Self {
            cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a row given `(column, value)` pairs with strictly increasing
    /// columns. Panics if a column is out of bounds or out of order.
    pub fn push_row(&mut self, entries: &[(usize, f64)]) {
        let mut last: Option<usize> = None;
        for &(c, v) in entries {
            assert!(c < self.cols, "column {} out of bounds ({})", c, self.cols);
            if let Some(prev) = last {
                assert!(c > prev, "columns must be strictly increasing");
            }
            last = Some(c);
            self.indices.push(c);
            self.values.push(v);
        }
        self.indptr.push(self.indices.len());
    }

    pub fn rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Widens the column count. Panics if `cols` would drop stored entries.
    pub fn set_cols(&mut self, cols: usize) {
        let max_used = self.indices.iter().copied().max().map_or(0, |m| m + 1);
        assert!(cols >= max_used, "cannot shrink below a used column");
        self.cols = cols;
    }

    /// `(columns, values)` of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    /// Dot product of row `r` with a dense vector.
    pub fn row_dot(&self, r: usize, x: &DVector<f64>) -> f64 {
        let (idx, val) = self.row(r);
        idx.iter().zip(val).map(|(&j, &v)| v * x[j]).sum()
    }

    /// `acc += alpha * row_r`.
    pub fn add_scaled_row(&self, r: usize, alpha: f64, acc: &mut DVector<f64>) {
        let (idx, val) = self.row(r);
        for (&j, &v) in idx.iter().zip(val) {
            acc[j] += alpha * v;
        }
    }

    /// Squared Euclidean norm of row `r`.
    pub fn row_norm_squared(&self, r: usize) -> f64 {
        let (_, val) = self.row(r);
        val.iter().map(|v| v * v).sum()
    }
}
