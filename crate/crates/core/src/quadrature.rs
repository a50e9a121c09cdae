//! Quadrature on triangles and on [0, 1].
//!
//! Symmetric rules are used up to degree 5 (the 7-point rule is the default
//! for MoM integrals). Higher degrees fall back to a collapsed Gauss–Legendre
//! product rule, which has positive weights and arbitrary order.

use crate::geometry::Vec3;

/// Barycentric points and weights normalised to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Smallest available rule exact for polynomials of total degree `degree`.
    pub fn for_degree(degree: usize) -> TriangleRule {
        match degree {
            0 | 1 => TriangleRule {
                degree: 1,
                points: vec![[1.0 / 3.0; 3]],
                weights: vec![1.0],
            },
            2 => {
                let mut r = TriangleRule { degree: 2, points: Vec::new(), weights: Vec::new() };
                r.push_orbit(1.0 / 6.0, 1.0 / 3.0);
                r
            }
            3 | 4 => {
                let mut r = TriangleRule { degree: 4, points: Vec::new(), weights: Vec::new() };
                r.push_orbit(0.445_948_490_915_965, 0.223_381_589_678_011);
                r.push_orbit(0.091_576_213_509_771, 0.109_951_743_655_322);
                r
            }
            5 => {
                let s15 = 15f64.sqrt();
                let mut r = TriangleRule {
                    degree: 5,
                    points: vec![[1.0 / 3.0; 3]],
                    weights: vec![9.0 / 40.0],
                };
                r.push_orbit((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0);
                r.push_orbit((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0);
                r
            }
            d => TriangleRule::collapsed_gauss(d.div_ceil(2) + 1),
        }
    }

    /// Conical product of `n`-point Gauss–Legendre rules, exact to degree 2n − 2.
    pub fn collapsed_gauss(n: usize) -> TriangleRule {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            let u = x[i];
            for j in 0..n {
                let v = x[j] * (1.0 - u);
                // area of the reference triangle is 1/2
                weights.push(2.0 * w[i] * w[j] * (1.0 - u));
                points.push([1.0 - u - v, u, v]);
            }
        }
        TriangleRule { degree: 2 * n - 2, points, weights }
    }

    /// Rule for integrands with `ρ log ρ` behaviour at the triangle edges and
    /// corners. The triangle is split into three sub-triangles at its
    /// centroid; each uses an `n × n` Gauss–Legendre product rule graded
    /// cubically towards the outer edge and towards both edge endpoints.
    pub fn edge_graded(n: usize) -> TriangleRule {
        let (x, w) = gauss_legendre(n);
        let c = [1.0 / 3.0; 3];
        let mut points = Vec::with_capacity(3 * n * n);
        let mut weights = Vec::with_capacity(3 * n * n);
        for e in 0..3 {
            let mut p = [0.0; 3];
            p[e] = 1.0;
            let mut q = [0.0; 3];
            q[(e + 1) % 3] = 1.0;
            for i in 0..n {
                let sig = x[i];
                let s = sig * sig * sig;
                let ds = 3.0 * sig * sig * w[i];
                for j in 0..n {
                    let tau = x[j];
                    let t = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
                    let dt = 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau) * w[j];
                    let mut l = [0.0; 3];
                    for k in 0..3 {
                        let edge_pt = p[k] + t * (q[k] - p[k]);
                        l[k] = c[k] + (1.0 - s) * (edge_pt - c[k]);
                    }
                    points.push(l);
                    // each sub-triangle covers a third of the area; the
                    // reference map has Jacobian 2(1 − s) per unit area
                    weights.push(2.0 * (1.0 - s) * ds * dt / 3.0);
                }
            }
        }
        TriangleRule { degree: 0, points, weights }
    }

    /// Rule for integrands singular along edge 0 (vertex 0 to vertex 1) and
    /// at its endpoints: the triangle is collapsed onto vertex 2 with `n × n`
    /// points, graded cubically towards the edge and towards both endpoints.
    pub fn graded_towards_edge(n: usize) -> TriangleRule {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            let sig = x[i];
            let s = sig * sig * sig;
            let ds = 3.0 * sig * sig * w[i];
            for j in 0..n {
                let tau = x[j];
                let t = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
                let dt = 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau) * w[j];
                points.push([(1.0 - s) * (1.0 - t), (1.0 - s) * t, s]);
                weights.push(2.0 * (1.0 - s) * ds * dt);
            }
        }
        TriangleRule { degree: 0, points, weights }
    }

    /// Rule for integrands singular at vertex 0 only: Duffy collapse onto the
    /// vertex with quadratic grading in the radial direction.
    pub fn graded_towards_vertex(n: usize) -> TriangleRule {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            let sig = x[i];
            let s = sig * sig;
            let ds = 2.0 * sig * w[i];
            for j in 0..n {
                let t = x[j];
                points.push([1.0 - s, s * (1.0 - t), s * t]);
                weights.push(2.0 * s * ds * w[j]);
            }
        }
        TriangleRule { degree: 0, points, weights }
    }

    /// Same rule with barycentric coordinates rotated so that vertex 0 of the
    /// reference becomes vertex `k`.
    pub fn rotated(&self, k: usize) -> TriangleRule {
        let points = self
            .points
            .iter()
            .map(|l| {
                let mut r = [0.0; 3];
                for i in 0..3 {
                    r[(i + k) % 3] = l[i];
                }
                r
            })
            .collect();
        TriangleRule { degree: self.degree, points, weights: self.weights.clone() }
    }

    fn push_orbit(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        for p in [[b, a, a], [a, b, a], [a, a, b]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical points of the rule on triangle `(a, b, c)`.
    pub fn map(&self, tri: &[Vec3; 3]) -> impl Iterator<Item = Vec3> + '_ {
        let t = *tri;
        self.points.iter().map(move |l| t[0] * l[0] + t[1] * l[1] + t[2] * l[2])
    }
}

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Exact mean of l1^a l2^b l3^c over the triangle: 2·a!b!c!/(a+b+c+2)!.
    fn exact_mean(a: usize, b: usize, c: usize) -> f64 {
        2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)
    }

    fn check_exact(rule: &TriangleRule) {
        for a in 0..=rule.degree {
            for b in 0..=(rule.degree - a) {
                for c in 0..=(rule.degree - a - b) {
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
                        .sum();
                    let e = exact_mean(a, b, c);
                    assert!((q - e).abs() <= 1e-13 * e.max(1e-3), "degree {} monomial ({a},{b},{c}): {q} vs {e}", rule.degree);
                }
            }
        }
    }

    #[test]
    fn rules_are_exact_to_their_degree() {
        for d in 1..=12 {
            let r = TriangleRule::for_degree(d);
            assert!(r.degree >= d);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
            check_exact(&r);
        }
    }

    #[test]
    fn edge_graded_rule_integrates_smooth_and_edge_singular_functions() {
        for n in [3, 6, 10] {
            let r = TriangleRule::edge_graded(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-13, "n={n}: {s}");
        }
        // mean of l1·ln(l1) over the triangle is −5/18
        let f = |r: &TriangleRule| -> f64 {
            r.points.iter().zip(&r.weights).map(|(l, w)| w * l[0] * l[0].ln()).sum()
        };
        let exact = -5.0 / 18.0;
        let coarse = (f(&TriangleRule::edge_graded(4)) - exact).abs();
        let fine = (f(&TriangleRule::edge_graded(10)) - exact).abs();
        assert!(fine < 1e-8 && fine < coarse, "{coarse} {fine}");
    }

    #[test]
    fn directional_graded_rules() {
        let mean = |r: &TriangleRule, f: &dyn Fn(&[f64; 3]) -> f64| -> f64 {
            r.points.iter().zip(&r.weights).map(|(l, w)| w * f(l)).sum()
        };
        for n in [8, 12] {
            let e = TriangleRule::graded_towards_edge(n);
            let v = TriangleRule::graded_towards_vertex(n);
            assert!((mean(&e, &|_| 1.0) - 1.0).abs() < 1e-13);
            assert!((mean(&v, &|_| 1.0) - 1.0).abs() < 1e-13);
            // l1·l2 has mean 1/12
            assert!((mean(&e, &|l| l[1] * l[2]) - 1.0 / 12.0).abs() < 1e-13);
            assert!((mean(&v, &|l| l[1] * l[2]) - 1.0 / 12.0).abs() < 1e-13);
        }
        // edge 0 is l2 = 0; vertex 0 is l0 = 1
        let e = TriangleRule::graded_towards_edge(10);
        assert!((mean(&e, &|l| l[2] * l[2].ln()) + 5.0 / 18.0).abs() < 1e-9);
        let v = TriangleRule::graded_towards_vertex(10);
        let r = v.rotated(1);
        assert!((mean(&v, &|l| l[1]) - mean(&r, &|l| l[2])).abs() < 1e-15);
    }

    #[test]
    fn default_rule_has_seven_points() {
        assert_eq!(TriangleRule::for_degree(5).len(), 7);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }
}
