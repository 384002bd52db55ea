//! Minimal compressed-row storage used for assembly and matrix-vector work.
//!
//! Factorizations go through `faer`; this type only has to build, multiply
//! and convert.

use faer::sparse::{SparseColMat, SymbolicSparseColMat};

#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            ..Default::default()
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.nrows && c < self.ncols);
        self.rows.push(r);
        self.cols.push(c);
        self.vals.push(v);
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Append every entry of `other`, shifted by `(row_off, col_off)`.
    pub fn extend_shifted(&mut self, other: &CsrMatrix, row_off: usize, col_off: usize) {
        for r in 0..other.nrows {
            for k in other.indptr[r]..other.indptr[r + 1] {
                self.push(r + row_off, other.indices[k] + col_off, other.values[k]);
            }
        }
    }

    /// Sum duplicates in a fixed order so the result does not depend on thread timing.
    pub fn into_csr(self) -> CsrMatrix {
        let nrows = self.nrows;
        let mut counts = vec![0usize; nrows + 1];
        for &r in &self.rows {
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut order = vec![0usize; self.vals.len()];
        let mut next = counts.clone();
        for (k, &r) in self.rows.iter().enumerate() {
            order[next[r]] = k;
            next[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(self.vals.len());
        let mut values = Vec::with_capacity(self.vals.len());
        indptr.push(0);
        let mut row_buf: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row_buf.clear();
            for &k in &order[counts[r]..counts[r + 1]] {
                row_buf.push((self.cols[k], self.vals[k]));
            }
            // stable sort keeps insertion order among equal columns
            row_buf.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < row_buf.len() {
                let c = row_buf[i].0;
                let mut s = 0.0;
                while i < row_buf.len() && row_buf[i].0 == c {
                    s += row_buf[i].1;
                    i += 1;
                }
                indices.push(c);
                values.push(s);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *yr = s;
        }
    }

    /// `y = A^T x`
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, xr) in x.iter().enumerate() {
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += self.values[k] * xr;
            }
        }
        y
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        let mut s = 0.0;
        for (r, xr) in x.iter().enumerate() {
            if *xr == 0.0 {
                continue;
            }
            let mut t = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                t += self.values[k] * y[self.indices[k]];
            }
            s += xr * t;
        }
        s
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut indptr = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            indptr[c + 1] += 1;
        }
        for i in 0..self.ncols {
            indptr[i + 1] += indptr[i];
        }
        let mut next = indptr.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                indices[next[c]] = r;
                values[next[c]] = self.values[k];
                next[c] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            values,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.indices[self.indptr[r]..self.indptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.values[self.indptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|A_ij - A_ji|`, for symmetry checks.
    pub fn max_asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                worst = worst.max((self.values[k] - t.get(r, c)).abs());
            }
        }
        worst
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        // the CSR arrays of the transpose are the CSC arrays of the matrix
        let t = self.transpose();
        SparseColMat::new(
            SymbolicSparseColMat::new_checked(self.nrows, self.ncols, t.indptr, None, t.indices),
            t.values,
        )
    }

    /// Lower triangle (including the diagonal) as a faer matrix, for symmetric factorizations.
    ///
    /// Column `j` of the lower triangle is read from row `j` of the upper triangle, so the
    /// matrix is assumed symmetric.
    pub fn lower_to_faer(&self) -> SparseColMat<usize, f64> {
        let mut col_ptr = Vec::with_capacity(self.nrows + 1);
        let mut row_idx = Vec::with_capacity(self.nnz() / 2 + self.nrows);
        let mut values = Vec::with_capacity(self.nnz() / 2 + self.nrows);
        col_ptr.push(0);
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                if c >= r {
                    row_idx.push(c);
                    values.push(self.values[k]);
                }
            }
            col_ptr.push(row_idx.len());
        }
        SparseColMat::new(
            SymbolicSparseColMat::new_checked(self.nrows, self.ncols, col_ptr, None, row_idx),
            values,
        )
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Pairwise summation; reproducible to a few ulps independent of length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let mut b = TripletBuilder::new(2, 3);
        b.push(0, 2, 1.0);
        b.push(1, 0, 2.0);
        b.push(0, 2, 0.5);
        b.push(0, 1, -1.0);
        let a = b.into_csr();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 2), 1.5);
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 2.0]), vec![2.0, 2.0]);
        assert_eq!(a.mul_transpose_vec(&[1.0, 1.0]), vec![2.0, -1.0, 1.5]);
    }

    #[test]
    fn pairwise_sum_matches_naive_for_exact_inputs() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499500.0);
    }
}
