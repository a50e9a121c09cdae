//! Shared helpers for the integration tests: seeded random data and an
//! independent dense solver used as an oracle.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type C64 = Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| random_c(rng)).collect()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖a − b‖ / ‖b‖`.
pub fn rel_err(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b)
}

/// Row-major dense product.
pub fn dense_matvec(n: usize, a: &[C64], x: &[C64]) -> Vec<C64> {
    (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
}

/// Gaussian elimination with partial pivoting on a row-major copy.
pub fn dense_solve(n: usize, a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i * n + k].norm().total_cmp(&m[j * n + k].norm())).unwrap();
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
            }
            x.swap(k, p);
        }
        let piv = m[k * n + k];
        for i in k + 1..n {
            let f = m[i * n + k] / piv;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for j in k..n {
                let v = m[k * n + j];
                m[i * n + j] -= f * v;
            }
            let v = x[k];
            x[i] -= f * v;
        }
    }
    for k in (0..n).rev() {
        let s: C64 = (k + 1..n).map(|j| m[k * n + j] * x[j]).sum();
        x[k] = (x[k] - s) / m[k * n + k];
    }
    x
}

/// Dense inverse by solving against every unit vector.
pub fn dense_inverse(n: usize, a: &[C64]) -> Vec<C64> {
    let mut inv = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[j] = C64::new(1.0, 0.0);
        let col = dense_solve(n, a, &e);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    inv
}

pub fn dense_matmul(n: usize, a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

/// Random `n × n` matrix with the diagonal raised by `shift`.
pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<C64> {
    let mut a: Vec<C64> = (0..n * n).map(|_| random_c(rng)).collect();
    for i in 0..n {
        a[i * n + i] += shift;
    }
    a
}
