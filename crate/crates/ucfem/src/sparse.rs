//! Minimal CSR sparse matrix assembled from triplets.
//!
//! Assembly emits symmetric pairs, so the stored pattern is symmetric; for a
//! symmetric matrix the CSR arrays double as CSC arrays, which is what the
//! factorization backend consumes.

/// Compressed sparse row matrix with sorted, deduplicated column indices.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from (row, col, value) triplets, summing duplicates. The sort is
    /// stable and the summation order follows the sorted stream, so identical
    /// triplet streams yield bitwise-identical matrices.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &mut Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut i = 0;
        while i < triplets.len() {
            let (r, c, mut v) = triplets[i];
            debug_assert!(r < n_rows && c < n_cols, "triplet out of range");
            let mut j = i + 1;
            while j < triplets.len() && triplets[j].0 == r && triplets[j].1 == c {
                v += triplets[j].2;
                j += 1;
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
            i = j;
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { n_rows, n_cols, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut y = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
        y
    }

    /// Entries of the upper triangle (col ≥ row) as a new CSR/CSC matrix.
    /// For a symmetric matrix this is the CSC upper-triangular storage the
    /// Cholesky-type backend expects.
    pub fn upper_triangle(&self) -> CsrMatrix {
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                // Rows of A become columns of the stored upper factor: keep
                // col ≤ row from the CSR view so CSC column r holds rows ≤ r.
                if self.col_idx[k] <= r {
                    col_idx.push(self.col_idx[k]);
                    values.push(self.values[k]);
                    row_ptr[r + 1] += 1;
                }
            }
        }
        for r in 0..self.n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { n_rows: self.n_rows, n_cols: self.n_cols, row_ptr, col_idx, values }
    }

    /// Maximum absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes the matrix as whitespace-separated `i j value` lines.
    pub fn write_coo(&self, w: &mut dyn std::io::Write) -> std::io::Result<()> {
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                writeln!(w, "{} {} {:.17e}", r, self.col_idx[k], self.values[k])?;
            }
        }
        Ok(())
    }
}
