//! Closed-form static potential integrals over a flat triangle.
//!
//! For an observation point `r` and a source triangle `T` these return
//!
//! ```text
//! scalar = ∫_T 1/|r − r'| dS'
//! vector = ∫_T (ρ' − ρ)/|r − r'| dS'
//! ```
//!
//! where `ρ` is the projection of `r` onto the plane of `T`. The formulas are
//! the standard edge-sum expressions (Wilton et al., Graglia).

use crate::geometry::Vec3;

/// Precomputed edge frame of a source triangle.
#[derive(Debug, Clone)]
pub struct TriangleFrame {
    pub vertices: [Vec3; 3],
    pub normal: Vec3,
    /// Unit edge directions, edge i runs from vertex i to vertex i+1.
    edge_dir: [Vec3; 3],
    /// Outward in-plane edge normals.
    edge_out: [Vec3; 3],
}

impl TriangleFrame {
    pub fn new(vertices: [Vec3; 3]) -> Self {
        let normal = (vertices[1] - vertices[0]).cross(&(vertices[2] - vertices[0])).normalized();
        let mut edge_dir = [Vec3::ZERO; 3];
        let mut edge_out = [Vec3::ZERO; 3];
        for i in 0..3 {
            let d = (vertices[(i + 1) % 3] - vertices[i]).normalized();
            edge_dir[i] = d;
            edge_out[i] = d.cross(&normal);
        }
        TriangleFrame { vertices, normal, edge_dir, edge_out }
    }

    /// Returns `(∫ 1/R, ∫ (ρ' − ρ)/R, ρ)`.
    pub fn static_integrals(&self, r: &Vec3) -> (f64, Vec3, Vec3) {
        let p = self.potential_integrals(r);
        (p.scalar[0], p.vector[0], p.rho)
    }

    /// Integrals of `R^n` and `(ρ' − ρ)·R^n` over the triangle for n = −1, 1, 3.
    pub fn potential_integrals(&self, r: &Vec3) -> PotentialIntegrals {
        let d = self.normal.dot(&(*r - self.vertices[0]));
        let rho = *r - self.normal * d;
        let ad = d.abs();
        let d2 = d * d;
        let scale = (self.vertices[1] - self.vertices[0]).norm();
        let tiny = 1e-12 * scale;

        let mut angle_sum = 0.0;
        let mut t0_l = [0.0; 3];
        let mut vector = [Vec3::ZERO; 3];
        for i in 0..3 {
            let pm = self.vertices[i];
            let pp = self.vertices[(i + 1) % 3];
            let l = self.edge_dir[i];
            let u = self.edge_out[i];
            let l_plus = (pp - rho).dot(&l);
            let l_minus = (pm - rho).dot(&l);
            let t0 = (pm - rho).dot(&u);
            let r0_sq = t0 * t0 + d2;
            let r_plus = (pp - *r).norm();
            let r_minus = (pm - *r).norm();

            // ∫ dl/R = ln((R+ + l+)/(R− + l−)); for negative l the sum R + l
            // is rewritten as R0²/(R − l) to avoid cancellation
            let log_term = if r0_sq.sqrt() < tiny {
                0.0
            } else {
                let num = if l_plus >= 0.0 { r_plus + l_plus } else { r0_sq / (r_plus - l_plus) };
                let den = if l_minus >= 0.0 { r_minus + l_minus } else { r0_sq / (r_minus - l_minus) };
                (num / den).ln()
            };
            if t0.abs() >= tiny && ad >= tiny {
                angle_sum += (t0 * l_plus / (r0_sq + ad * r_plus)).atan()
                    - (t0 * l_minus / (r0_sq + ad * r_minus)).atan();
            }

            // line integrals ∫ R^n dl along the edge, n = −1, 1, 3, 5
            let (rp2, rm2) = (r_plus * r_plus, r_minus * r_minus);
            let l1 = 0.5 * (l_plus * r_plus - l_minus * r_minus + r0_sq * log_term);
            let l3 = 0.25 * (l_plus * r_plus * rp2 - l_minus * r_minus * rm2 + 3.0 * r0_sq * l1);
            let l5 = (l_plus * r_plus * rp2 * rp2 - l_minus * r_minus * rm2 * rm2 + 5.0 * r0_sq * l3) / 6.0;

            t0_l[0] += t0 * log_term;
            t0_l[1] += t0 * l1;
            t0_l[2] += t0 * l3;
            vector[0] += u * l1;
            vector[1] += u * (l3 / 3.0);
            vector[2] += u * (l5 / 5.0);
        }
        let i_m1 = t0_l[0] - ad * angle_sum;
        let i_1 = (d2 * i_m1 + t0_l[1]) / 3.0;
        let i_3 = (3.0 * d2 * i_1 + t0_l[2]) / 5.0;
        PotentialIntegrals { rho, scalar: [i_m1, i_1, i_3], vector }
    }
}

/// Closed-form source-triangle integrals for one observation point `r`.
/// Index 0, 1, 2 of each array holds the power n = −1, 1, 3 of `R = |r − r'|`.
#[derive(Debug, Clone, Copy)]
pub struct PotentialIntegrals {
    /// Projection of `r` onto the triangle plane.
    pub rho: Vec3,
    /// `∫ R^n dS'`
    pub scalar: [f64; 3],
    /// `∫ (ρ' − ρ) R^n dS'`
    pub vector: [Vec3; 3],
}
