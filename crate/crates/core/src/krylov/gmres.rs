//! Restarted GMRES with Givens rotations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::KrylovError;

type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecondSide {
    /// Solve `P⁻¹·Z·x = P⁻¹·b`; the preconditioned residual is monitored.
    Left,
    /// Solve `Z·P⁻¹·y = b`, then `x = P⁻¹·y`; the true residual is monitored.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmresConfig {
    pub tol: f64,
    pub restart: usize,
    pub max_iters: usize,
    pub side: PrecondSide,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig { tol: 1e-6, restart: 100, max_iters: 5000, side: PrecondSide::Left }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GmresReport {
    #[serde(skip)]
    pub solution: Vec<C64>,
    /// Total inner (Arnoldi) steps over all restart cycles.
    pub iterations: usize,
    /// Relative monitored residual after every inner step.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// `‖b − Z·x‖ / ‖b‖` of the returned solution.
    pub true_residual: f64,
    /// The Arnoldi process produced a vanishing basis vector.
    pub breakdown: bool,
    pub restart: usize,
    pub side: PrecondSide,
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn checked(v: Vec<C64>, n: usize) -> Result<Vec<C64>, KrylovError> {
    if v.len() != n {
        return Err(KrylovError::LengthMismatch { expected: n, got: v.len() });
    }
    Ok(v)
}

/// Solves `Z·x = b`, `Z` given by `matvec`, optionally preconditioned by
/// `precond` (an approximation of `Z⁻¹`). Starts from `x = 0`.
pub fn gmres(
    matvec: &dyn Fn(&[C64]) -> Vec<C64>,
    precond: Option<&dyn Fn(&[C64]) -> Vec<C64>>,
    b: &[C64],
    config: &GmresConfig,
) -> Result<GmresReport, KrylovError> {
    if !(config.tol > 0.0 && config.tol < 1.0) {
        return Err(KrylovError::InvalidParameter(format!("tolerance {} outside (0, 1)", config.tol)));
    }
    if config.restart == 0 {
        return Err(KrylovError::InvalidParameter("restart must be at least 1".into()));
    }
    let n = b.len();
    let zero = C64::new(0.0, 0.0);
    let identity = |v: &[C64]| v.to_vec();
    let prec: &dyn Fn(&[C64]) -> Vec<C64> = precond.unwrap_or(&identity);
    let apply_m = |v: &[C64]| checked(prec(v), n);
    let apply_z = |v: &[C64]| checked(matvec(v), n);

    let b_norm = norm(b);
    let mut report = GmresReport {
        solution: vec![zero; n],
        iterations: 0,
        residual_history: Vec::new(),
        converged: true,
        true_residual: 0.0,
        breakdown: false,
        restart: config.restart,
        side: config.side,
    };
    if b_norm == 0.0 {
        return Ok(report);
    }
    // monitored residual: preconditioned (left) or true (right)
    let monitored = |x: &[C64]| -> Result<Vec<C64>, KrylovError> {
        let zx = apply_z(x)?;
        let r: Vec<C64> = b.iter().zip(&zx).map(|(p, q)| p - q).collect();
        match config.side {
            PrecondSide::Left => apply_m(&r),
            PrecondSide::Right => Ok(r),
        }
    };
    let ref_norm = match config.side {
        PrecondSide::Left => norm(&apply_m(b)?),
        PrecondSide::Right => b_norm,
    };
    if ref_norm == 0.0 {
        return Err(KrylovError::InvalidParameter("preconditioner maps b to zero".into()));
    }

    let mut x = vec![zero; n];
    // tightened when the monitored residual converges but the true one lags
    let mut target = config.tol;
    let m = config.restart;
    let mut converged = false;
    'outer: while report.iterations < config.max_iters {
        let r = monitored(&x)?;
        let beta = norm(&r);
        if beta / ref_norm <= target {
            if true_residual(&apply_z, b, &x)? <= 10.0 * config.tol {
                converged = true;
                break;
            }
            target *= 0.1;
            if beta / ref_norm <= target {
                continue;
            }
        }
        let mut v: Vec<Vec<C64>> = vec![r.iter().map(|z| z / beta).collect()];
        // Hessenberg columns, already rotated
        let mut h: Vec<Vec<C64>> = Vec::with_capacity(m);
        let mut cs: Vec<(f64, C64)> = Vec::with_capacity(m);
        let mut g = vec![zero; m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k = 0;
        let mut stop = false;
        while k < m && report.iterations < config.max_iters {
            let mut w = match config.side {
                PrecondSide::Left => apply_m(&apply_z(&v[k])?)?,
                PrecondSide::Right => apply_z(&apply_m(&v[k])?)?,
            };
            let w_norm0 = norm(&w);
            let mut col = vec![zero; k + 2];
            for (i, vi) in v.iter().enumerate() {
                let c = dot(vi, &w);
                col[i] = c;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= c * vj;
                }
            }
            let mut w_norm = norm(&w);
            if w_norm < 0.7 * w_norm0 {
                // orthogonality lost: one more pass
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(vi, &w);
                    col[i] += c;
                    for (wj, vj) in w.iter_mut().zip(vi) {
                        *wj -= c * vj;
                    }
                }
                w_norm = norm(&w);
            }
            col[k + 1] = C64::new(w_norm, 0.0);
            for (i, &(c, s)) in cs.iter().enumerate() {
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = c * a + s * bb;
                col[i + 1] = -s.conj() * a + c * bb;
            }
            let (c, s) = givens(col[k], col[k + 1]);
            col[k] = c * col[k] + s * col[k + 1];
            col[k + 1] = zero;
            g[k + 1] = -s.conj() * g[k];
            g[k] *= c;
            cs.push((c, s));
            h.push(col);
            k += 1;
            report.iterations += 1;
            let res = g[k].norm() / ref_norm;
            report.residual_history.push(res);
            if w_norm <= 1e-14 * w_norm0.max(f64::MIN_POSITIVE) {
                report.breakdown = true;
                stop = true;
                break;
            }
            if res <= target {
                break;
            }
            v.push(w.iter().map(|z| z / w_norm).collect());
        }
        // back substitution for the k×k triangular system
        let mut y = vec![zero; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut dx = vec![zero; n];
        for (yj, vj) in y.iter().zip(&v) {
            for (d, q) in dx.iter_mut().zip(vj) {
                *d += yj * q;
            }
        }
        if config.side == PrecondSide::Right {
            dx = apply_m(&dx)?;
        }
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        if stop {
            let r = monitored(&x)?;
            converged = norm(&r) / ref_norm <= config.tol && true_residual(&apply_z, b, &x)? <= 10.0 * config.tol;
            break 'outer;
        }
    }
    if !converged && report.iterations >= config.max_iters {
        let r = monitored(&x)?;
        converged = norm(&r) / ref_norm <= config.tol && true_residual(&apply_z, b, &x)? <= 10.0 * config.tol;
    }
    report.true_residual = true_residual(&apply_z, b, &x)?;
    report.converged = converged;
    report.solution = x;
    Ok(report)
}

fn true_residual(
    apply_z: &dyn Fn(&[C64]) -> Result<Vec<C64>, KrylovError>,
    b: &[C64],
    x: &[C64],
) -> Result<f64, KrylovError> {
    let zx = apply_z(x)?;
    let r: f64 = b.iter().zip(&zx).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
    Ok(r / norm(b))
}

/// Rotation `[c s; −s̄ c]` with real `c` that zeroes `b` in `(a, b)`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let (na, nb) = (a.norm(), b.norm());
    if nb == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let r = na.hypot(nb);
    let c = na / r;
    let s = (a / na) * b.conj() / r;
    (c, s)
}
