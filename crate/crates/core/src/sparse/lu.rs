//! Left-looking sparse LU with threshold partial pivoting.
//!
//! Columns are processed in a fill-reducing symmetric order. Each column is
//! a sparse triangular solve against the finished part of `L`; the set of
//! nonzeros it can produce is found by a depth-first search over the graph
//! of `L` before any arithmetic is done.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{MemoryReport, SparseComplexMatrix, SparseError};

type C64 = Complex64;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillOrdering {
    Natural,
    Amd,
    /// METIS nested dissection.
    NestedDissection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LuConfig {
    pub ordering: FillOrdering,
    /// The diagonal is kept as pivot when `|a_kk| ≥ threshold·max_i |a_ik|`.
    pub pivot_threshold: f64,
    /// Pivots below `singular_tol·max|A|` are rejected.
    pub singular_tol: f64,
}

impl Default for LuConfig {
    fn default() -> Self {
        LuConfig { ordering: FillOrdering::Amd, pivot_threshold: 0.1, singular_tol: 1e-14 }
    }
}

/// `P·Q·A·Qᵀ = L·U`. `L` is unit lower triangular, both factors are stored
/// by columns in pivot order.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    /// `q[k]` is the original index of the `k`-th row/column of the ordered
    /// matrix.
    q: Vec<usize>,
    /// `pinv[i] = k` when row `i` of the ordered matrix was pivot `k`.
    pinv: Vec<usize>,
    l_start: Vec<usize>,
    l_index: Vec<usize>,
    l_values: Vec<C64>,
    u_start: Vec<usize>,
    u_index: Vec<usize>,
    u_values: Vec<C64>,
}

impl SparseLu {
    pub fn factor(a: &SparseComplexMatrix, config: &LuConfig) -> Result<SparseLu, SparseError> {
        if !(0.0..=1.0).contains(&config.pivot_threshold) {
            return Err(SparseError::InvalidParameter(format!("pivot threshold {} outside [0, 1]", config.pivot_threshold)));
        }
        let n = a.size();
        let q = match config.ordering {
            FillOrdering::Natural => (0..n).collect(),
            FillOrdering::Amd => amd_order(a)?,
            FillOrdering::NestedDissection => nested_dissection_order(a)?,
        };
        let mut qinv = vec![0; n];
        for (k, &i) in q.iter().enumerate() {
            qinv[i] = k;
        }
        // columns of Q·A·Qᵀ
        let mut col_start = vec![0usize; n + 1];
        for &j in a.col_index() {
            col_start[qinv[j] + 1] += 1;
        }
        for j in 0..n {
            col_start[j + 1] += col_start[j];
        }
        let mut next = col_start.clone();
        let mut col_rows = vec![0usize; a.nnz()];
        let mut col_vals = vec![C64::new(0.0, 0.0); a.nnz()];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let c = qinv[j];
                col_rows[next[c]] = qinv[i];
                col_vals[next[c]] = v;
                next[c] += 1;
            }
        }
        let max_abs = a.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let floor = config.singular_tol * max_abs;

        let mut pinv = vec![NONE; n];
        let mut l_start = vec![0usize];
        let mut l_index: Vec<usize> = Vec::with_capacity(4 * a.nnz());
        let mut l_values: Vec<C64> = Vec::with_capacity(4 * a.nnz());
        let mut u_start = vec![0usize];
        let mut u_index: Vec<usize> = Vec::with_capacity(4 * a.nnz());
        let mut u_values: Vec<C64> = Vec::with_capacity(4 * a.nnz());

        let mut x = vec![C64::new(0.0, 0.0); n];
        let mut marked = vec![false; n];
        let mut reach: Vec<usize> = Vec::with_capacity(n);
        let mut stack: Vec<(usize, usize)> = Vec::with_capacity(n);

        for k in 0..n {
            let (rs, re) = (col_start[k], col_start[k + 1]);
            // nonzero pattern of L⁻¹·a_k in topological order (reversed)
            reach.clear();
            for &i in &col_rows[rs..re] {
                if marked[i] {
                    continue;
                }
                marked[i] = true;
                stack.push((i, 0));
                while let Some(top) = stack.last_mut() {
                    let (node, pos) = (top.0, &mut top.1);
                    let j = pinv[node];
                    let children = if j == NONE { &[][..] } else { &l_index[l_start[j] + 1..l_start[j + 1]] };
                    while *pos < children.len() && marked[children[*pos]] {
                        *pos += 1;
                    }
                    if *pos < children.len() {
                        let child = children[*pos];
                        *pos += 1;
                        marked[child] = true;
                        stack.push((child, 0));
                    } else {
                        reach.push(node);
                        stack.pop();
                    }
                }
            }
            for &i in &col_rows[rs..re] {
                x[i] = C64::new(0.0, 0.0);
            }
            for &i in &reach {
                x[i] = C64::new(0.0, 0.0);
            }
            for (&i, &v) in col_rows[rs..re].iter().zip(&col_vals[rs..re]) {
                x[i] += v;
            }
            for &i in reach.iter().rev() {
                let j = pinv[i];
                if j == NONE {
                    continue;
                }
                let xi = x[i];
                for p in l_start[j] + 1..l_start[j + 1] {
                    x[l_index[p]] -= l_values[p] * xi;
                }
            }

            // pivot search
            let mut best = NONE;
            let mut best_abs = -1.0;
            for &i in reach.iter().rev() {
                if pinv[i] == NONE {
                    let v = x[i].norm();
                    if v > best_abs {
                        best_abs = v;
                        best = i;
                    }
                } else {
                    u_index.push(pinv[i]);
                    u_values.push(x[i]);
                }
            }
            if best == NONE || best_abs <= floor || best_abs == 0.0 {
                return Err(SparseError::Singular { column: k, original: q[k] });
            }
            if pinv[k] == NONE && marked[k] && x[k].norm() >= config.pivot_threshold * best_abs && x[k].norm() > floor {
                best = k;
            }
            let pivot = x[best];
            pinv[best] = k;
            u_index.push(k);
            u_values.push(pivot);
            u_start.push(u_index.len());

            l_index.push(best);
            l_values.push(C64::new(1.0, 0.0));
            for &i in reach.iter().rev() {
                if pinv[i] == NONE {
                    l_index.push(i);
                    l_values.push(x[i] / pivot);
                }
            }
            l_start.push(l_index.len());

            for &i in &reach {
                marked[i] = false;
            }
        }
        // L row indices from ordered-matrix rows to pivot steps
        for i in l_index.iter_mut() {
            *i = pinv[*i];
        }
        Ok(SparseLu { n, q, pinv, l_start, l_index, l_values, u_start, u_index, u_values })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Stored entries of `L` and `U` with the unit diagonal of `L` counted
    /// once: `nnz(L) + nnz(U) − N`.
    pub fn fill_nnz(&self) -> usize {
        self.l_index.len() + self.u_index.len() - self.n
    }

    pub fn memory_report(&self) -> MemoryReport {
        let entries = self.l_index.len() + self.u_index.len();
        MemoryReport {
            nnz: self.fill_nnz(),
            bytes: entries * (std::mem::size_of::<C64>() + std::mem::size_of::<usize>())
                + (2 * (self.n + 1) + 2 * self.n) * std::mem::size_of::<usize>(),
        }
    }

    /// The symmetric fill-reducing order, `ordering()[k]` = original index.
    pub fn ordering(&self) -> &[usize] {
        &self.q
    }

    /// Solves `A·x = b`.
    pub fn apply(&self, b: &[C64]) -> Result<Vec<C64>, SparseError> {
        if b.len() != self.n {
            return Err(SparseError::LengthMismatch { expected: self.n, got: b.len() });
        }
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        for i in 0..self.n {
            y[self.pinv[i]] = b[self.q[i]];
        }
        for j in 0..self.n {
            let yj = y[j];
            if yj == C64::new(0.0, 0.0) {
                continue;
            }
            for p in self.l_start[j] + 1..self.l_start[j + 1] {
                y[self.l_index[p]] -= self.l_values[p] * yj;
            }
        }
        for j in (0..self.n).rev() {
            // diagonal is the last entry of each U column
            let end = self.u_start[j + 1] - 1;
            y[j] /= self.u_values[end];
            let yj = y[j];
            for p in self.u_start[j]..end {
                y[self.u_index[p]] -= self.u_values[p] * yj;
            }
        }
        let mut x = vec![C64::new(0.0, 0.0); self.n];
        for j in 0..self.n {
            x[self.q[j]] = y[j];
        }
        Ok(x)
    }
}

fn amd_order(a: &SparseComplexMatrix) -> Result<Vec<usize>, SparseError> {
    let n = a.size();
    if n == 0 {
        return Ok(Vec::new());
    }
    // the CSR arrays of A are the CSC arrays of Aᵀ; AMD orders A + Aᵀ either way
    let (p, _, _) = amd::order::<usize>(n, a.row_start(), a.col_index(), &amd::Control::default())
        .map_err(|s| SparseError::Ordering(format!("{s:?}")))?;
    Ok(p)
}

fn nested_dissection_order(a: &SparseComplexMatrix) -> Result<Vec<usize>, SparseError> {
    let n = a.size();
    if n == 0 {
        return Ok(Vec::new());
    }
    // adjacency of A + Aᵀ without the diagonal
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    let mut xadj: Vec<metis_sys::idx_t> = Vec::with_capacity(n + 1);
    let mut adjncy: Vec<metis_sys::idx_t> = Vec::new();
    xadj.push(0);
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
        adjncy.extend(list.iter().map(|&j| j as metis_sys::idx_t));
        xadj.push(adjncy.len() as metis_sys::idx_t);
    }
    let to_idx = |v: usize| metis_sys::idx_t::try_from(v).map_err(|_| SparseError::Ordering("graph too large for METIS".into()));
    let mut nv = to_idx(n)?;
    to_idx(adjncy.len())?;
    let mut options = [0 as metis_sys::idx_t; metis_sys::METIS_NOPTIONS as usize];
    let mut perm = vec![0 as metis_sys::idx_t; n];
    let mut iperm = vec![0 as metis_sys::idx_t; n];
    // SAFETY: the arrays outlive the call and have the lengths METIS expects
    // for `nv` vertices; the option array is reset to defaults first.
    let status = unsafe {
        metis_sys::METIS_SetDefaultOptions(options.as_mut_ptr());
        metis_sys::METIS_NodeND(
            &mut nv,
            xadj.as_mut_ptr(),
            adjncy.as_mut_ptr(),
            std::ptr::null_mut(),
            options.as_mut_ptr(),
            perm.as_mut_ptr(),
            iperm.as_mut_ptr(),
        )
    };
    if status != metis_sys::rstatus_et_METIS_OK {
        return Err(SparseError::Ordering(format!("METIS_NodeND returned {status}")));
    }
    Ok(perm.into_iter().map(|p| p as usize).collect())
}
