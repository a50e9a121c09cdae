//! Plane-wave incidence and the tested right-hand side.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::PhysicsParams;
use crate::geometry::Vec3;
use crate::mesh::SurfaceMesh;
use crate::quadrature::TriangleRule;

/// `b[m] = ⟨f_m, E_i⟩`, volts.
pub type ExcitationVector = Vec<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Polarization {
    /// E along θ̂ of the incidence direction.
    VV,
    /// E along φ̂ of the incidence direction.
    HH,
}

/// Plane wave arriving from direction `(theta, phi)`; it propagates along
/// `−r̂(theta, phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWave {
    pub theta: f64,
    pub phi: f64,
    pub polarization: Polarization,
    pub amplitude: f64,
}

impl PlaneWave {
    pub fn new(theta: f64, phi: f64, polarization: Polarization) -> Self {
        PlaneWave { theta, phi, polarization, amplitude: 1.0 }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn propagation(&self) -> Vec3 {
        -spherical_r(self.theta, self.phi)
    }

    pub fn polarization_vector(&self) -> Vec3 {
        match self.polarization {
            Polarization::VV => spherical_theta(self.theta, self.phi),
            Polarization::HH => spherical_phi(self.phi),
        }
    }

    /// Incident field at `r`.
    pub fn field(&self, k: f64, r: &Vec3) -> [Complex64; 3] {
        let phase = Complex64::from_polar(self.amplitude, -k * self.propagation().dot(r));
        let p = self.polarization_vector();
        [phase * p.0[0], phase * p.0[1], phase * p.0[2]]
    }
}

pub fn spherical_r(theta: f64, phi: f64) -> Vec3 {
    Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

pub fn spherical_theta(theta: f64, phi: f64) -> Vec3 {
    Vec3::new(theta.cos() * phi.cos(), theta.cos() * phi.sin(), -theta.sin())
}

pub fn spherical_phi(phi: f64) -> Vec3 {
    Vec3::new(-phi.sin(), phi.cos(), 0.0)
}

/// Tested excitation with the default degree-7 rule.
pub fn excitation(mesh: &SurfaceMesh, physics: &PhysicsParams, wave: &PlaneWave) -> ExcitationVector {
    excitation_with_degree(mesh, physics, wave, 7)
}

pub fn excitation_with_degree(
    mesh: &SurfaceMesh,
    physics: &PhysicsParams,
    wave: &PlaneWave,
    degree: usize,
) -> ExcitationVector {
    let rule = TriangleRule::for_degree(degree);
    let k = physics.wavenumber;
    let mut b = vec![Complex64::new(0.0, 0.0); mesh.num_bases()];
    let verts = mesh.vertices();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let pts = mesh.triangle_points(t);
        // ∫ (r − c) E dS and ∫ E dS over the triangle, per component
        let mut e0 = [Complex64::new(0.0, 0.0); 3];
        let mut e1 = Complex64::new(0.0, 0.0);
        for (p, w) in rule.map(&pts).zip(&rule.weights) {
            let e = wave.field(k, &p);
            let d = p - tri.centroid;
            for i in 0..3 {
                e0[i] += e[i] * (w * tri.area);
                e1 += e[i] * (w * tri.area * d.0[i]);
            }
        }
        for on in mesh.bases_on(t) {
            let basis = &mesh.bases()[on.basis];
            let dc = tri.centroid - verts[on.free_vertex];
            let mut s = e1;
            for i in 0..3 {
                s += e0[i] * dc.0[i];
            }
            b[on.basis] += s * (on.sign * basis.length / (2.0 * tri.area));
        }
    }
    b
}
