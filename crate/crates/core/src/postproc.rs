//! Far fields, radar cross section and the Mie series for PEC spheres.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::efie::{spherical_phi, spherical_r, spherical_theta, PhysicsParams, Polarization, SPEED_OF_LIGHT};
use crate::mesh::SurfaceMesh;
use crate::quadrature::TriangleRule;

/// Lower clamp for RCS in dBsm.
pub const DB_FLOOR: f64 = -120.0;

#[derive(Debug, Error, PartialEq)]
pub enum PostprocError {
    #[error("coefficient vector has length {got}, mesh has {expected} bases")]
    LengthMismatch { expected: usize, got: usize },
    #[error("angle grids differ")]
    GridMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct FarFieldResult {
    /// Observation directions `(θ, φ)` in radians.
    pub angles: Vec<(f64, f64)>,
    /// σ in m².
    pub sigma: Vec<f64>,
    /// `10·log10 σ`, clamped at [`DB_FLOOR`].
    pub rcs_db: Vec<f64>,
    pub polarization: Polarization,
}

impl FarFieldResult {
    fn new(angles: Vec<(f64, f64)>, sigma: Vec<f64>, polarization: Polarization) -> Self {
        let rcs_db = sigma.iter().map(|&s| to_db(s)).collect();
        FarFieldResult { angles, sigma, rcs_db, polarization }
    }

    /// `thetaDeg,phiDeg,rcsDbsm` lines under a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("thetaDeg,phiDeg,rcsDbsm\n");
        for ((t, p), db) in self.angles.iter().zip(&self.rcs_db) {
            let _ = writeln!(s, "{:.6},{:.6},{:.6}", t.to_degrees(), p.to_degrees(), db);
        }
        s
    }
}

pub fn to_db(sigma: f64) -> f64 {
    if sigma > 0.0 { (10.0 * sigma.log10()).max(DB_FLOOR) } else { DB_FLOOR }
}

/// `n` equally spaced angles from `start` to `end` inclusive, radians.
pub fn angle_sweep(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n).map(|i| start + (end - start) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Bistatic RCS of the surface current `Σ x_n f_n` for an incident field of
/// amplitude `incident_amplitude`. The co-polar component is used: `θ̂` for
/// VV, `φ̂` for HH.
pub fn scattered_farfield(
    mesh: &SurfaceMesh,
    physics: &PhysicsParams,
    coefficients: &[Complex64],
    angles: &[(f64, f64)],
    polarization: Polarization,
    incident_amplitude: f64,
) -> Result<FarFieldResult, PostprocError> {
    if coefficients.len() != mesh.num_bases() {
        return Err(PostprocError::LengthMismatch { expected: mesh.num_bases(), got: coefficients.len() });
    }
    let k = physics.wavenumber;
    let eta = physics.wave_impedance;
    let rule = TriangleRule::for_degree(5);
    let verts = mesh.vertices();
    // per triangle: the current density at each quadrature point times w·A
    let samples: Vec<Vec<([f64; 3], [Complex64; 3])>> = (0..mesh.num_triangles())
        .map(|t| {
            let tri = &mesh.triangles()[t];
            let pts: Vec<_> = rule.map(&mesh.triangle_points(t)).collect();
            pts.iter()
                .zip(&rule.weights)
                .map(|(p, w)| {
                    let mut j = [Complex64::new(0.0, 0.0); 3];
                    for on in mesh.bases_on(t) {
                        let l = mesh.bases()[on.basis].length;
                        let f = (*p - verts[on.free_vertex]) * (on.sign * l / (2.0 * tri.area));
                        for i in 0..3 {
                            j[i] += coefficients[on.basis] * (f.0[i] * w * tri.area);
                        }
                    }
                    (p.0, j)
                })
                .collect()
        })
        .collect();
    let sigma: Vec<f64> = angles
        .par_iter()
        .map(|&(theta, phi)| {
            let r = spherical_r(theta, phi);
            let pol = match polarization {
                Polarization::VV => spherical_theta(theta, phi),
                Polarization::HH => spherical_phi(phi),
            };
            let mut n = Complex64::new(0.0, 0.0);
            for tri in &samples {
                for (p, j) in tri {
                    let phase = Complex64::from_polar(1.0, k * (r.0[0] * p[0] + r.0[1] * p[1] + r.0[2] * p[2]));
                    n += phase * (j[0] * pol.0[0] + j[1] * pol.0[1] + j[2] * pol.0[2]);
                }
            }
            k * k * eta * eta / (4.0 * PI) * n.norm_sqr() / (incident_amplitude * incident_amplitude)
        })
        .collect();
    Ok(FarFieldResult::new(angles.to_vec(), sigma, polarization))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MieConfig {
    pub radius: f64,
    pub frequency: f64,
    pub max_order: usize,
}

impl MieConfig {
    /// Truncation at `ka + 15` terms, raised to `ka + 4 ka^(1/3) + 10` for large spheres.
    pub fn new(radius: f64, frequency: f64) -> Self {
        let ka = 2.0 * PI * frequency / SPEED_OF_LIGHT * radius;
        MieConfig { radius, frequency, max_order: (ka + 15.0).max(ka + 4.0 * ka.cbrt() + 10.0).ceil() as usize }
    }

    pub fn size_parameter(&self) -> f64 {
        2.0 * PI * self.frequency / SPEED_OF_LIGHT * self.radius
    }

    fn validate(&self) -> Result<(), PostprocError> {
        if !(self.radius > 0.0 && self.frequency > 0.0) {
            return Err(PostprocError::InvalidParameter("radius and frequency must be positive".into()));
        }
        if (self.max_order as f64) < self.size_parameter() + 15.0 - 1.0 {
            return Err(PostprocError::InvalidParameter(format!(
                "max order {} below ka + 15 = {:.1}",
                self.max_order,
                self.size_parameter() + 15.0
            )));
        }
        Ok(())
    }
}

/// Mie coefficients `(a_n, b_n)`, `n = 1..=max_order`, of a PEC sphere.
pub fn mie_coefficients(config: &MieConfig) -> Result<Vec<(Complex64, Complex64)>, PostprocError> {
    config.validate()?;
    let x = config.size_parameter();
    let nmax = config.max_order;
    let (psi, chi) = riccati_bessel(x, nmax);
    let xi = |n: usize| Complex64::new(psi[n], chi[n]);
    Ok((1..=nmax)
        .map(|n| {
            let nf = n as f64;
            let dpsi = psi[n - 1] - nf * psi[n] / x;
            let dxi = xi(n - 1) - xi(n) * (nf / x);
            (Complex64::new(dpsi, 0.0) / dxi, Complex64::new(psi[n], 0.0) / xi(n))
        })
        .collect())
}

/// `ψ_n = x·j_n(x)` and `χ_n = x·y_n(x)` for `n = 0..=nmax`.
fn riccati_bessel(x: f64, nmax: usize) -> (Vec<f64>, Vec<f64>) {
    // j_n by downward recurrence from well above nmax, normalized with j_0
    let start = nmax + 20 + x.ceil() as usize;
    let mut j = vec![0.0; start + 2];
    j[start + 1] = 0.0;
    j[start] = 1e-300;
    for n in (1..=start).rev() {
        j[n - 1] = (2 * n + 1) as f64 / x * j[n] - j[n + 1];
        if j[n - 1].abs() > 1e250 {
            for v in j[n - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    // normalize against whichever of j_0, j_1 is further from a zero
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    let scale = if j0.abs() >= j1.abs() { j0 / j[0] } else { j1 / j[1] };
    let psi: Vec<f64> = (0..=nmax).map(|n| x * j[n] * scale).collect();
    // y_n upward, which is stable
    let mut y = vec![0.0; nmax + 1];
    y[0] = -x.cos() / x;
    if nmax >= 1 {
        y[1] = -x.cos() / (x * x) - x.sin() / x;
    }
    for n in 1..nmax {
        y[n + 1] = (2 * n + 1) as f64 / x * y[n] - y[n - 1];
    }
    let chi = y.iter().map(|v| x * v).collect();
    (psi, chi)
}

/// Scattering amplitudes `(S1, S2)` at scattering angle `gamma`.
fn amplitudes(coef: &[(Complex64, Complex64)], gamma: f64) -> (Complex64, Complex64) {
    let mu = gamma.cos();
    let (mut pi_prev, mut pi_n) = (0.0, 1.0);
    let mut s1 = Complex64::new(0.0, 0.0);
    let mut s2 = Complex64::new(0.0, 0.0);
    for (i, &(a, b)) in coef.iter().enumerate() {
        let n = (i + 1) as f64;
        let tau = n * mu * pi_n - (n + 1.0) * pi_prev;
        let f = (2.0 * n + 1.0) / (n * (n + 1.0));
        s1 += (a * pi_n + b * tau) * f;
        s2 += (a * tau + b * pi_n) * f;
        let next = ((2.0 * n + 1.0) * mu * pi_n - (n + 1.0) * pi_prev) / n;
        pi_prev = pi_n;
        pi_n = next;
    }
    (s1, s2)
}

/// Exact bistatic RCS of a PEC sphere for a wave arriving from `θ = 0`
/// (propagating along −z) with E along x. VV observes the `φ = 0` E-plane
/// component, HH the `φ = 90°` H-plane component; `angles` are `(θ, φ)` and
/// only `θ` enters, since those planes are the principal cuts.
pub fn mie_rcs(config: &MieConfig, angles: &[(f64, f64)], polarization: Polarization) -> Result<FarFieldResult, PostprocError> {
    let coef = mie_coefficients(config)?;
    let k = config.size_parameter() / config.radius;
    let sigma = angles
        .iter()
        .map(|&(theta, _)| {
            let (s1, s2) = amplitudes(&coef, PI - theta);
            let s = match polarization {
                Polarization::VV => s2,
                Polarization::HH => s1,
            };
            4.0 * PI / (k * k) * s.norm_sqr()
        })
        .collect();
    Ok(FarFieldResult::new(angles.to_vec(), sigma, polarization))
}

/// Extinction and scattering efficiencies from the same coefficients.
pub fn mie_efficiencies(config: &MieConfig) -> Result<(f64, f64), PostprocError> {
    let coef = mie_coefficients(config)?;
    let x = config.size_parameter();
    let (mut ext, mut sca) = (0.0, 0.0);
    for (i, (a, b)) in coef.iter().enumerate() {
        let w = (2 * (i + 1) + 1) as f64;
        ext += w * (a + b).re;
        sca += w * (a.norm_sqr() + b.norm_sqr());
    }
    Ok((2.0 * ext / (x * x), 2.0 * sca / (x * x)))
}

#[derive(Debug, Clone, Serialize)]
pub struct RcsComparison {
    pub rms_db: f64,
    pub max_db: f64,
    pub samples_used: usize,
    pub samples_total: usize,
    pub null_guard_db: f64,
}

/// dB error of `solver` against `reference` on identical angle grids.
/// Around every local minimum of the reference, samples within
/// `null_guard_db` of that minimum are excluded.
pub fn rcs_compare(solver: &FarFieldResult, reference: &FarFieldResult, null_guard_db: f64) -> Result<RcsComparison, PostprocError> {
    if solver.angles.len() != reference.angles.len()
        || solver.angles.iter().zip(&reference.angles).any(|(a, b)| (a.0 - b.0).abs() > 1e-12 || (a.1 - b.1).abs() > 1e-12)
    {
        return Err(PostprocError::GridMismatch);
    }
    let r = &reference.rcs_db;
    let n = r.len();
    let mut keep = vec![true; n];
    for i in 0..n {
        let left_ok = i == 0 || r[i - 1] >= r[i];
        let right_ok = i + 1 == n || r[i + 1] >= r[i];
        let rises = (i > 0 && r[i - 1] > r[i]) || (i + 1 < n && r[i + 1] > r[i]);
        if !(left_ok && right_ok && rises) || null_guard_db <= 0.0 {
            continue;
        }
        let limit = r[i] + null_guard_db;
        let mut j = i;
        while j > 0 && r[j - 1] <= limit && r[j - 1] >= r[j] {
            j -= 1;
        }
        let mut e = i;
        while e + 1 < n && r[e + 1] <= limit && r[e + 1] >= r[e] {
            e += 1;
        }
        keep[j..=e].iter_mut().for_each(|k| *k = false);
    }
    let diffs: Vec<f64> = (0..n).filter(|&i| keep[i]).map(|i| solver.rcs_db[i] - r[i]).collect();
    let used = diffs.len();
    let rms = if used == 0 { 0.0 } else { (diffs.iter().map(|d| d * d).sum::<f64>() / used as f64).sqrt() };
    let max = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    Ok(RcsComparison { rms_db: rms, max_db: max, samples_used: used, samples_total: n, null_guard_db })
}
