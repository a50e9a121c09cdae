//! Dense eigenvalue diagnostics of the system matrix and its preconditioned form.

use ndarray::Array2;
use ndarray_linalg::EigVals;
use num_complex::Complex64;
use serde::Serialize;

use super::KrylovError;
use crate::efie::ComplexDenseBlock;
use crate::sparse::SparseLu;

/// Largest matrix accepted by [`dense_spectrum`] by default.
pub const DEFAULT_DENSE_CAP: usize = 6000;

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
}

impl SpectrumReport {
    /// Fraction of eigenvalues with `|λ − 1| ≤ radius`.
    pub fn cluster_fraction(&self, radius: f64) -> f64 {
        if self.eigenvalues.is_empty() {
            return 0.0;
        }
        let one = Complex64::new(1.0, 0.0);
        let inside = self.eigenvalues.iter().filter(|l| (*l - one).norm() <= radius).count();
        inside as f64 / self.eigenvalues.len() as f64
    }

    /// `max|λ| / min|λ|`. Equals the 2-norm condition number only for normal
    /// matrices; otherwise it is a lower bound.
    pub fn condition_estimate(&self) -> f64 {
        let mags = self.eigenvalues.iter().map(|l| l.norm());
        let (lo, hi) = mags.fold((f64::INFINITY, 0.0f64), |(lo, hi), m| (lo.min(m), hi.max(m)));
        if lo == 0.0 { f64::INFINITY } else { hi / lo }
    }

    /// `re,im` lines under a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("re,im\n");
        for l in &self.eigenvalues {
            s.push_str(&format!("{:.12e},{:.12e}\n", l.re, l.im));
        }
        s
    }
}

/// `Z` divided by the mean magnitude of its diagonal.
pub fn normalize_by_mean_diagonal(z: &ComplexDenseBlock) -> ComplexDenseBlock {
    let n = z.nrows();
    let mean = (0..n).map(|i| z.get(i, i).norm()).sum::<f64>() / n.max(1) as f64;
    let mut out = z.clone();
    if mean > 0.0 {
        for v in out.entries.iter_mut() {
            *v /= mean;
        }
    }
    out
}

/// Eigenvalues of `Z`, or of `P⁻¹·Z` when a factored preconditioner is given
/// (formed column by column).
pub fn dense_spectrum(z: &ComplexDenseBlock, lu: Option<&SparseLu>, cap: usize) -> Result<SpectrumReport, KrylovError> {
    let n = z.nrows();
    if z.ncols() != n {
        return Err(KrylovError::InvalidParameter(format!("matrix is {} x {}, not square", n, z.ncols())));
    }
    if n > cap {
        return Err(KrylovError::TooLarge { n, cap });
    }
    let mut a = Array2::from_shape_vec((n, n), z.entries.clone()).expect("row-major block");
    if let Some(lu) = lu {
        if lu.size() != n {
            return Err(KrylovError::LengthMismatch { expected: n, got: lu.size() });
        }
        for j in 0..n {
            let col: Vec<Complex64> = a.column(j).to_vec();
            let pc = lu.apply(&col).map_err(|e| KrylovError::Preconditioner(e.to_string()))?;
            a.column_mut(j).assign(&ndarray::Array1::from(pc));
        }
    }
    let eig = a.eigvals().map_err(|e| KrylovError::Lapack(e.to_string()))?;
    Ok(SpectrumReport { eigenvalues: eig.to_vec() })
}
