//! Compressed sparse row storage for complex matrices and its sparse LU.

mod lu;

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

pub use lu::{FillOrdering, LuConfig, SparseLu};

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("index ({0}, {1}) outside a {2} x {2} matrix")]
    OutOfBounds(usize, usize, usize),
    #[error("vector length {got} does not match matrix size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("singular preconditioner: no acceptable pivot in column {column} (original row/column {original})")]
    Singular { column: usize, original: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("fill-reducing ordering failed: {0}")]
    Ordering(String),
}

/// Square CSR matrix. Column indices are strictly increasing within a row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseComplexMatrix {
    n: usize,
    row_start: Vec<usize>,
    col_index: Vec<usize>,
    values: Vec<Complex64>,
}

/// Stored-entry counts of a matrix or factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MemoryReport {
    pub nnz: usize,
    pub bytes: usize,
}

impl SparseComplexMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Result<Self, SparseError> {
        for &(i, j, _) in &triplets {
            if i >= n || j >= n {
                return Err(SparseError::OutOfBounds(i, j, n));
            }
        }
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_start = vec![0usize; n + 1];
        let mut col_index = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            row_start[i + 1] += 1;
            col_index.push(j);
            values.push(v);
        }
        for i in 0..n {
            row_start[i + 1] += row_start[i];
        }
        Ok(SparseComplexMatrix { n, row_start, col_index, values })
    }

    pub fn identity(n: usize) -> Self {
        SparseComplexMatrix {
            n,
            row_start: (0..=n).collect(),
            col_index: (0..n).collect(),
            values: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    /// Keeps every entry of a dense row-major matrix whose value is nonzero.
    pub fn from_dense(n: usize, dense: &[Complex64]) -> Self {
        assert_eq!(dense.len(), n * n);
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = dense[i * n + j];
                if v != Complex64::new(0.0, 0.0) {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, t).expect("indices in range")
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_index.len()
    }

    pub fn row_start(&self) -> &[usize] {
        &self.row_start
    }

    pub fn col_index(&self) -> &[usize] {
        &self.col_index
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[Complex64]) {
        let r = self.row_start[i]..self.row_start[i + 1];
        (&self.col_index[r.clone()], &self.values[r])
    }

    /// Stored value at `(i, j)`, if the position is in the pattern.
    pub fn get(&self, i: usize, j: usize) -> Option<Complex64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>, SparseError> {
        if x.len() != self.n {
            return Err(SparseError::LengthMismatch { expected: self.n, got: x.len() });
        }
        Ok((0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, v)| v * x[j]).sum()
            })
            .collect())
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut d = vec![Complex64::new(0.0, 0.0); self.n * self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[i * self.n + j] = v;
            }
        }
        d
    }

    /// True when `(i, j)` is stored exactly when `(j, i)` is.
    pub fn pattern_is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).0.iter().all(|&j| self.row(j).0.binary_search(&i).is_ok()))
    }

    pub fn memory_report(&self) -> MemoryReport {
        MemoryReport {
            nnz: self.nnz(),
            bytes: self.nnz() * (std::mem::size_of::<Complex64>() + std::mem::size_of::<usize>())
                + (self.n + 1) * std::mem::size_of::<usize>(),
        }
    }

    /// Matrix Market coordinate format, complex general, 1-based indices.
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate complex general\n");
        let _ = writeln!(s, "{} {} {}", self.n, self.n, self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, v) in cols.iter().zip(vals) {
                let _ = writeln!(s, "{} {} {:.17e} {:.17e}", i + 1, j + 1, v.re, v.im);
            }
        }
        s
    }

    /// Sparsity pattern as `row,col` lines (0-based) under a header.
    pub fn pattern_csv(&self) -> String {
        let mut s = String::from("row,col\n");
        for i in 0..self.n {
            for &j in self.row(i).0 {
                let _ = writeln!(s, "{i},{j}");
            }
        }
        s
    }
}

/// Reads back a matrix written by [`SparseComplexMatrix::to_matrix_market`].
pub fn parse_matrix_market(text: &str) -> Result<SparseComplexMatrix, SparseError> {
    let bad = |m: &str| SparseError::InvalidParameter(format!("matrix market: {m}"));
    let mut lines = text.lines().filter(|l| !l.starts_with('%') && !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("missing size line"))?;
    let dims: Vec<usize> = header.split_whitespace().map(|t| t.parse().map_err(|_| bad("bad size line"))).collect::<Result<_, _>>()?;
    if dims.len() != 3 || dims[0] != dims[1] {
        return Err(bad("expected a square size line"));
    }
    let mut t = Vec::with_capacity(dims[2]);
    for l in lines {
        let tok: Vec<&str> = l.split_whitespace().collect();
        if tok.len() != 4 {
            return Err(bad("expected `i j re im`"));
        }
        let i: usize = tok[0].parse().map_err(|_| bad("bad row"))?;
        let j: usize = tok[1].parse().map_err(|_| bad("bad column"))?;
        let re: f64 = tok[2].parse().map_err(|_| bad("bad value"))?;
        let im: f64 = tok[3].parse().map_err(|_| bad("bad value"))?;
        if i == 0 || j == 0 {
            return Err(bad("indices are 1-based"));
        }
        t.push((i - 1, j - 1, Complex64::new(re, im)));
    }
    SparseComplexMatrix::from_triplets(dims[0], t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = SparseComplexMatrix::from_triplets(3, vec![(1, 2, c(1.0)), (0, 0, c(2.0)), (1, 0, c(3.0)), (1, 2, c(4.0))]).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(1, 2), Some(c(5.0)));
        assert_eq!(m.row(1).0, &[0, 2]);
        assert_eq!(m.get(2, 2), None);
        assert!(SparseComplexMatrix::from_triplets(2, vec![(2, 0, c(1.0))]).is_err());
    }

    #[test]
    fn matrix_market_round_trip() {
        let m = SparseComplexMatrix::from_triplets(3, vec![(0, 1, Complex64::new(1.5, -2.0)), (2, 2, c(1e-30))]).unwrap();
        let back = parse_matrix_market(&m.to_matrix_market()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn pattern_csv_lists_entries() {
        let m = SparseComplexMatrix::identity(2);
        assert_eq!(m.pattern_csv(), "row,col\n0,0\n1,1\n");
    }
}
