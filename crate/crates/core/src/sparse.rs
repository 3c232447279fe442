//! Row-compressed sparse adjacency matrices.

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Largest dimension [`SparseAdjacency::dense_of`] will expand.
pub const DENSE_LIMIT: usize = 4096;

/// Tolerance used when checking a symmetry claim.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Weighted sparse `n × n` matrix in CSR form.
///
/// Column indices are strictly increasing within a row and every stored weight
/// is finite and strictly positive. When `symmetric` is set, the pattern is
/// symmetric and mirrored weights agree within [`SYMMETRY_TOL`].
#[derive(Clone, Debug, PartialEq)]
pub struct SparseAdjacency {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    symmetric: bool,
}

impl SparseAdjacency {
    /// Matrix with no stored entries.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            vals: Vec::new(),
            symmetric: true,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
            symmetric: true,
        }
    }

    /// Builds from per-row `(column, weight)` lists that are already sorted by column.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>, symmetric: bool) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::Shape {
                what: "adjacency row count",
                expected: n,
                found: rows.len(),
            });
        }
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self::from_csr(n, row_ptr, cols, vals, symmetric)
    }

    /// Builds from raw CSR arrays, checking every invariant.
    pub fn from_csr(
        n: usize,
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
        symmetric: bool,
    ) -> Result<Self> {
        let m = Self {
            n,
            row_ptr,
            cols,
            vals,
            symmetric,
        };
        m.check_structure()?;
        if symmetric {
            m.check_symmetric(SYMMETRY_TOL)?;
        }
        Ok(m)
    }

    /// Builds a sparse matrix from a dense one, storing the nonzero entries.
    pub fn from_dense(dense: &DMatrix<f64>, symmetric: bool) -> Result<Self> {
        if dense.nrows() != dense.ncols() {
            return Err(Error::Shape {
                what: "dense matrix columns",
                expected: dense.nrows(),
                found: dense.ncols(),
            });
        }
        let n = dense.nrows();
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| dense[(i, j)] != 0.0)
                    .map(|j| (j, dense[(i, j)]))
                    .collect()
            })
            .collect();
        Self::from_rows(n, rows, symmetric)
    }

    fn check_structure(&self) -> Result<()> {
        let n = self.n;
        if self.row_ptr.len() != n + 1 || self.row_ptr[0] != 0 {
            return Err(Error::InvalidAdjacency("malformed row pointer array".into()));
        }
        if self.cols.len() != self.vals.len() || *self.row_ptr.last().unwrap() != self.cols.len() {
            return Err(Error::InvalidAdjacency(
                "row pointers disagree with stored entries".into(),
            ));
        }
        for i in 0..n {
            let (start, end) = (self.row_ptr[i], self.row_ptr[i + 1]);
            if start > end {
                return Err(Error::InvalidAdjacency(format!("row {i}: decreasing row pointer")));
            }
            let mut prev: Option<usize> = None;
            for k in start..end {
                let (c, v) = (self.cols[k], self.vals[k]);
                if c >= n {
                    return Err(Error::InvalidAdjacency(format!(
                        "row {i}: column {c} out of range for n = {n}"
                    )));
                }
                if prev.is_some_and(|p| p >= c) {
                    return Err(Error::InvalidAdjacency(format!(
                        "row {i}: columns not strictly increasing at {c}"
                    )));
                }
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidAdjacency(format!(
                        "entry ({i}, {c}) has weight {v}; stored weights must be positive"
                    )));
                }
                prev = Some(c);
            }
        }
        Ok(())
    }

    /// Checks that `(i, j)` is stored iff `(j, i)` is and that the weights agree within `tol`.
    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &w) in cols.iter().zip(vals) {
                match self.get(j, i) {
                    Some(m) if (m - w).abs() <= tol => {}
                    Some(m) => {
                        return Err(Error::Asymmetric {
                            row: i,
                            col: j,
                            diff: (m - w).abs(),
                        })
                    }
                    None => {
                        return Err(Error::Asymmetric {
                            row: i,
                            col: j,
                            diff: w,
                        })
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Column indices and weights of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[s..e], &self.vals[s..e])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.get(i, j).is_some()
    }

    /// Iterates all stored `(row, col, weight)` triples in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &w)| (i, j, w))
        })
    }

    /// Nonzero count of every column.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n];
        for &c in &self.cols {
            counts[c] += 1;
        }
        counts
    }

    pub fn is_binary(&self) -> bool {
        self.vals.iter().all(|&v| v == 1.0)
    }

    pub(crate) fn require_binary(&self) -> Result<()> {
        match self.triplets().find(|&(_, _, w)| w != 1.0) {
            None => Ok(()),
            Some((row, col, weight)) => Err(Error::NonBinary { row, col, weight }),
        }
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut row_ptr = vec![0usize; n + 1];
        for &c in &self.cols {
            row_ptr[c + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut next = row_ptr.clone();
        let mut cols = vec![0; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        // Rows are visited in increasing order, so each transposed row fills sorted.
        for (i, j, w) in self.triplets() {
            let slot = next[j];
            cols[slot] = i;
            vals[slot] = w;
            next[j] += 1;
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
            symmetric: self.symmetric,
        }
    }

    /// Dense copy of the matrix. Guarded to `n <= DENSE_LIMIT`.
    pub fn dense_of(&self) -> Result<DMatrix<f64>> {
        if self.n > DENSE_LIMIT {
            return Err(Error::SizeGuard {
                what: "dense_of",
                size: self.n,
                limit: DENSE_LIMIT,
            });
        }
        let mut dense = DMatrix::zeros(self.n, self.n);
        for (i, j, w) in self.triplets() {
            dense[(i, j)] = w;
        }
        Ok(dense)
    }

    /// Hex SHA-256 over the dimension, pattern and weight bits.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        for &p in &self.row_ptr {
            h.update((p as u64).to_le_bytes());
        }
        for &c in &self.cols {
            h.update((c as u64).to_le_bytes());
        }
        for &v in &self.vals {
            h.update(v.to_bits().to_le_bytes());
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
