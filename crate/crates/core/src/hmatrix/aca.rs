//! Adaptive cross approximation and SVD recompression of low-rank blocks.

use ndarray::{s, Array1, Array2, Axis};
use ndarray_linalg::{QR, SVD};
use num_complex::Complex64;

use crate::efie::EntryEvaluator;

type C64 = Complex64;

/// `A ≈ U·V` with `U: rows × rank` and `V: rank × cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankBlock {
    pub u: Array2<C64>,
    pub v: Array2<C64>,
}

impl LowRankBlock {
    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.ncols()
    }

    /// Stored complex entries.
    pub fn stored(&self) -> usize {
        self.u.len() + self.v.len()
    }

    pub fn to_dense(&self) -> Array2<C64> {
        self.u.dot(&self.v)
    }

    /// `y += U·(V·x)`.
    pub fn matvec_add(&self, x: &[C64], y: &mut [C64]) {
        let r = self.rank();
        if r == 0 {
            return;
        }
        let mut t = vec![C64::new(0.0, 0.0); r];
        for (k, tk) in t.iter_mut().enumerate() {
            let row = self.v.row(k);
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *tk = acc;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let row = self.u.row(i);
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(&t) {
                acc += a * b;
            }
            *yi += acc;
        }
    }
}

/// Outcome of a cross approximation.
#[derive(Debug, Clone)]
pub enum AcaResult {
    LowRank(LowRankBlock),
    /// Pivots ran out before the stopping rule was met, or the low-rank form
    /// would need more storage than the dense block.
    Stagnated,
}

/// Partially pivoted ACA of the block `rows × cols` of `eval`.
///
/// Stops once `‖u_k‖·‖v_k‖ ≤ tol·‖A_k‖_F`, with the Frobenius norm of the
/// running approximation updated incrementally.
pub fn aca<E: EntryEvaluator + ?Sized>(eval: &E, rows: &[usize], cols: &[usize], tol: f64) -> AcaResult {
    let (m, n) = (rows.len(), cols.len());
    let max_rank = m.min(n);
    let mut us: Vec<Array1<C64>> = Vec::new();
    let mut vs: Vec<Array1<C64>> = Vec::new();
    let mut used_rows = vec![false; m];
    let mut used_cols = vec![false; n];
    let mut norm2 = 0.0f64;
    let mut pivot_row = 0usize;
    let zero = C64::new(0.0, 0.0);

    loop {
        if us.len() >= max_rank || (us.len() + 1) * (m + n) > m * n {
            return if converged_full(&us, max_rank) { AcaResult::LowRank(pack(&us, &vs, m, n)) } else { AcaResult::Stagnated };
        }
        used_rows[pivot_row] = true;
        let mut row = Array1::from(eval.fill(&rows[pivot_row..=pivot_row], cols).entries);
        for (u, v) in us.iter().zip(&vs) {
            let c = u[pivot_row];
            row.scaled_add(-c, v);
        }
        let mut best = None;
        let mut best_abs = 0.0;
        for j in 0..n {
            let a = row[j].norm();
            if !used_cols[j] && a > best_abs {
                best_abs = a;
                best = Some(j);
            }
        }
        let Some(pc) = best else {
            // zero residual row: try another unused row
            match used_rows.iter().position(|&u| !u) {
                Some(r) => {
                    pivot_row = r;
                    continue;
                }
                None => return finish(us, vs, m, n),
            }
        };
        used_cols[pc] = true;
        let v = row.mapv(|x| x / row[pc]);
        let col_ids = [cols[pc]];
        let col_block = eval.fill(rows, &col_ids);
        let mut u = Array1::from(col_block.entries);
        for (uu, vv) in us.iter().zip(&vs) {
            let c = vv[pc];
            u.scaled_add(-c, uu);
        }

        let un = u.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let mut cross = zero;
        for (uu, vv) in us.iter().zip(&vs) {
            let a: C64 = uu.iter().zip(u.iter()).map(|(x, y)| x.conj() * y).sum();
            let b: C64 = vv.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
            cross += a * b;
        }
        norm2 += un * vn + 2.0 * cross.re;
        let step = (un * vn).sqrt();

        // next pivot row: largest entry of the new column among unused rows
        let mut next = None;
        let mut next_abs = -1.0;
        for i in 0..m {
            if !used_rows[i] && u[i].norm() > next_abs {
                next_abs = u[i].norm();
                next = Some(i);
            }
        }
        if step <= tol * norm2.max(0.0).sqrt() {
            // the new cross estimates the error of the current approximation;
            // it is below tolerance, so it is not worth storing
            return finish(us, vs, m, n);
        }
        us.push(u);
        vs.push(v);
        match next {
            Some(r) => pivot_row = r,
            None => return finish(us, vs, m, n),
        }
    }
}

fn converged_full(us: &[Array1<C64>], max_rank: usize) -> bool {
    us.len() >= max_rank
}

fn finish(us: Vec<Array1<C64>>, vs: Vec<Array1<C64>>, m: usize, n: usize) -> AcaResult {
    if us.len() * (m + n) > m * n {
        return AcaResult::Stagnated;
    }
    AcaResult::LowRank(pack(&us, &vs, m, n))
}

fn pack(us: &[Array1<C64>], vs: &[Array1<C64>], m: usize, n: usize) -> LowRankBlock {
    let r = us.len();
    let mut u = Array2::zeros((m, r));
    let mut v = Array2::zeros((r, n));
    for k in 0..r {
        u.column_mut(k).assign(&us[k]);
        v.row_mut(k).assign(&vs[k]);
    }
    LowRankBlock { u, v }
}

/// QR of both factors followed by a truncated SVD of the small core.
/// Keeps the smallest rank whose discarded singular values satisfy
/// `sqrt(Σ σ_dropped²) ≤ tol·‖UV‖_F`.
pub fn recompress(block: &LowRankBlock, tol: f64) -> LowRankBlock {
    let r = block.rank();
    let (m, n) = (block.nrows(), block.ncols());
    if r == 0 {
        return block.clone();
    }
    if r > m.min(n) {
        // more columns than rows: go through the dense product
        return truncate_dense(&block.to_dense(), tol);
    }
    let (qu, ru) = block.u.qr().expect("QR of U");
    let vt = block.v.t().to_owned();
    let (qv, rv) = vt.qr().expect("QR of V^T");
    let core = ru.dot(&rv.t());
    let (w, sig, zh) = core.svd(true, true).expect("SVD of core");
    let (w, zh) = (w.unwrap(), zh.unwrap());
    let keep = truncation_rank(sig.as_slice().unwrap(), tol);
    let mut u = qu.dot(&w.slice(s![.., ..keep]));
    for (k, mut col) in u.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|x| x * sig[k]);
    }
    let v = zh.slice(s![..keep, ..]).dot(&qv.t());
    LowRankBlock { u, v }
}

/// Truncated SVD of a dense matrix.
pub fn truncate_dense(a: &Array2<C64>, tol: f64) -> LowRankBlock {
    let (w, sig, zh) = a.svd(true, true).expect("SVD");
    let (w, zh) = (w.unwrap(), zh.unwrap());
    let keep = truncation_rank(sig.as_slice().unwrap(), tol);
    let mut u = w.slice(s![.., ..keep]).to_owned();
    for (k, mut col) in u.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|x| x * sig[k]);
    }
    LowRankBlock { u, v: zh.slice(s![..keep, ..]).to_owned() }
}

fn truncation_rank(sig: &[f64], tol: f64) -> usize {
    let total: f64 = sig.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0;
    }
    let limit = tol * tol * total;
    let mut tail = 0.0;
    let mut keep = sig.len();
    while keep > 0 {
        let s2 = sig[keep - 1] * sig[keep - 1];
        if tail + s2 > limit {
            break;
        }
        tail += s2;
        keep -= 1;
    }
    keep
}
