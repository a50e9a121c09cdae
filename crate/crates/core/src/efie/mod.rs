//! Galerkin EFIE matrix entries and plane-wave excitation on RWG bases.
//!
//! Time convention is `e^{+jωt}` with Green's function `G = e^{−jkR}/(4πR)`.
//! An entry is the sum over the four (test triangle, source triangle) pairs of
//! the basis supports:
//!
//! ```text
//! Z_mn = jωμ ∫∫ f_m·f_n G dS' dS + 1/(jωε) ∫∫ (∇·f_m)(∇·f_n) G dS' dS
//! ```
//!
//! All bases on a triangle pair share the same four scalar/vector moments of
//! `G`, so the kernel computes those once per pair ([`PairMoments`]) and forms
//! individual entries from them. For nearby pairs the static part `1/(4πR)` is
//! integrated in closed form over the source triangle and only the smooth
//! remainder `(e^{−jkR} − 1)/(4πR)` is sampled.

mod excitation;
pub mod potential;

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::mesh::SurfaceMesh;
use crate::quadrature::TriangleRule;
use potential::TriangleFrame;

pub use excitation::{
    excitation, excitation_with_degree, spherical_phi, spherical_r, spherical_theta, ExcitationVector, PlaneWave, Polarization,
};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

const J: Complex64 = Complex64::new(0.0, 1.0);
const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("triangle {tri} is not in the support of basis {basis}")]
    NotInSupport { basis: usize, tri: usize },
    #[error("basis index {0} out of range")]
    BadIndex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    pub frequency: f64,
    pub wavenumber: f64,
    pub wave_impedance: f64,
    pub speed_of_light: f64,
}

impl PhysicsParams {
    /// Free-space parameters at `frequency` Hz.
    pub fn new(frequency: f64) -> Self {
        assert!(frequency > 0.0, "frequency must be positive");
        PhysicsParams {
            frequency,
            wavenumber: 2.0 * std::f64::consts::PI * frequency / SPEED_OF_LIGHT,
            wave_impedance: MU0 * SPEED_OF_LIGHT,
            speed_of_light: SPEED_OF_LIGHT,
        }
    }

    pub fn wavelength(&self) -> f64 {
        self.speed_of_light / self.frequency
    }

    /// jωμ
    fn vector_coef(&self) -> Complex64 {
        J * (self.wavenumber * self.wave_impedance)
    }

    /// 1/(jωε)
    fn scalar_coef(&self) -> Complex64 {
        -J * (self.wave_impedance / self.wavenumber)
    }
}

/// Quadrature settings for matrix entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Polynomial degree of the test-triangle rule.
    pub outer_degree: usize,
    /// Polynomial degree of the source-triangle rule.
    pub inner_degree: usize,
    /// Test-triangle degree for near pairs without a common vertex.
    pub near_outer_degree: usize,
    /// Points per direction of the graded test rule for a triangle with
    /// itself (three sub-triangles, so `3n²` points).
    pub self_points: usize,
    /// Points per direction of the graded test rule for pairs sharing an edge.
    pub edge_points: usize,
    /// Points per direction of the graded test rule for pairs sharing a
    /// single vertex.
    pub vertex_points: usize,
    /// Pairs whose centroid distance is below `near_factor` times the larger
    /// triangle edge use singularity extraction.
    pub near_factor: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            outer_degree: 5,
            inner_degree: 5,
            near_outer_degree: 7,
            self_points: 10,
            edge_points: 10,
            vertex_points: 8,
            near_factor: 2.5,
        }
    }
}

impl QuadratureConfig {
    /// Raises every rule degree and point count by `extra`.
    pub fn refined(&self, extra: usize) -> Self {
        QuadratureConfig {
            outer_degree: self.outer_degree + extra,
            inner_degree: self.inner_degree + extra,
            near_outer_degree: self.near_outer_degree + extra,
            self_points: self.self_points + extra,
            edge_points: self.edge_points + extra,
            vertex_points: self.vertex_points + extra,
            near_factor: self.near_factor,
        }
    }

    /// Doubles every rule order.
    pub fn doubled(&self) -> Self {
        QuadratureConfig {
            outer_degree: 2 * self.outer_degree,
            inner_degree: 2 * self.inner_degree,
            near_outer_degree: 2 * self.near_outer_degree,
            self_points: 2 * self.self_points,
            edge_points: 2 * self.edge_points,
            vertex_points: 2 * self.vertex_points,
            near_factor: self.near_factor,
        }
    }
}

/// The four integrals of `G` over one (test, source) triangle pair, taken
/// relative to the triangle centroids `c_a`, `c_b`:
/// `s0 = ∫∫G`, `sr = ∫∫(r − c_a)G`, `sr_src = ∫∫(r' − c_b)G`,
/// `srr = ∫∫(r − c_a)·(r' − c_b)G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMoments {
    pub s0: Complex64,
    pub sr: [Complex64; 3],
    pub sr_src: [Complex64; 3],
    pub srr: Complex64,
}

impl PairMoments {
    const ZERO: PairMoments = PairMoments {
        s0: Complex64::new(0.0, 0.0),
        sr: [Complex64::new(0.0, 0.0); 3],
        sr_src: [Complex64::new(0.0, 0.0); 3],
        srr: Complex64::new(0.0, 0.0),
    };

    fn swapped(&self) -> PairMoments {
        PairMoments { s0: self.s0, sr: self.sr_src, sr_src: self.sr, srr: self.srr }
    }
}

/// Row-major dense block of Z with its basis index lists.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexDenseBlock {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub entries: Vec<Complex64>,
}

impl ComplexDenseBlock {
    pub fn zeros(rows: Vec<usize>, cols: Vec<usize>) -> Self {
        let n = rows.len() * cols.len();
        ComplexDenseBlock { rows, cols, entries: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.cols.len() + j]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        let nc = self.cols.len();
        &mut self.entries[i * nc + j]
    }

    pub fn transposed(&self) -> ComplexDenseBlock {
        let (m, n) = (self.rows.len(), self.cols.len());
        let mut entries = Vec::with_capacity(m * n);
        for j in 0..n {
            for i in 0..m {
                entries.push(self.entries[i * n + j]);
            }
        }
        ComplexDenseBlock { rows: self.cols.clone(), cols: self.rows.clone(), entries }
    }

    /// `y += B·x` with `x`, `y` indexed locally.
    pub fn matvec_add(&self, x: &[Complex64], y: &mut [Complex64]) {
        let nc = self.cols.len();
        for (i, yi) in y.iter_mut().enumerate().take(self.rows.len()) {
            let row = &self.entries[i * nc..(i + 1) * nc];
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *yi += acc;
        }
    }
}

/// Anything that can produce sub-blocks of the system matrix.
pub trait EntryEvaluator: Sync {
    fn size(&self) -> usize;
    fn fill(&self, rows: &[usize], cols: &[usize]) -> ComplexDenseBlock;
    /// True when `fill(r, c)` is exactly the transpose of `fill(c, r)`.
    fn is_symmetric(&self) -> bool {
        false
    }
}

struct TriangleData {
    frame: TriangleFrame,
    centroid: Vec3,
    area: f64,
    size: f64,
    outer: Vec<(Vec3, f64)>,
    near_outer: Vec<(Vec3, f64)>,
    points: [Vec3; 3],
    vertices: [usize; 3],
    inner: Vec<(Vec3, f64)>,
}

/// EFIE operator on a mesh at a fixed frequency.
pub struct EfieKernel<'m> {
    mesh: &'m SurfaceMesh,
    physics: PhysicsParams,
    quad: QuadratureConfig,
    tris: Vec<TriangleData>,
    self_rule: TriangleRule,
    edge_rule: TriangleRule,
    vertex_rule: TriangleRule,
    /// Moments of every pair of triangles with a common vertex, keyed by
    /// `(lower, higher)` triangle index.
    touching: HashMap<(usize, usize), PairMoments>,
}

impl<'m> EfieKernel<'m> {
    pub fn new(mesh: &'m SurfaceMesh, physics: PhysicsParams) -> Self {
        Self::with_quadrature(mesh, physics, QuadratureConfig::default())
    }

    pub fn with_quadrature(mesh: &'m SurfaceMesh, physics: PhysicsParams, quad: QuadratureConfig) -> Self {
        let outer_rule = TriangleRule::for_degree(quad.outer_degree);
        let near_rule = TriangleRule::for_degree(quad.near_outer_degree);
        let inner_rule = TriangleRule::for_degree(quad.inner_degree);
        let tris = (0..mesh.num_triangles())
            .map(|t| {
                let pts = mesh.triangle_points(t);
                let tri = &mesh.triangles()[t];
                let size = (0..3).map(|i| pts[i].distance(&pts[(i + 1) % 3])).fold(0.0, f64::max);
                TriangleData {
                    frame: TriangleFrame::new(pts),
                    centroid: tri.centroid,
                    area: tri.area,
                    size,
                    outer: sample_rule(&outer_rule, &pts, tri.area),
                    near_outer: sample_rule(&near_rule, &pts, tri.area),
                    points: pts,
                    vertices: tri.vertices,
                    inner: sample_rule(&inner_rule, &pts, tri.area),
                }
            })
            .collect();
        let mut kernel = EfieKernel {
            mesh,
            physics,
            quad,
            tris,
            self_rule: TriangleRule::edge_graded(quad.self_points.max(1)),
            edge_rule: TriangleRule::graded_towards_edge(quad.edge_points.max(1)),
            vertex_rule: TriangleRule::graded_towards_vertex(quad.vertex_points.max(1)),
            touching: HashMap::new(),
        };
        kernel.touching = kernel.touching_moments();
        kernel
    }

    /// Precomputes the expensive singular pairs once.
    fn touching_moments(&self) -> HashMap<(usize, usize), PairMoments> {
        let nt = self.tris.len();
        let mut by_vertex: HashMap<usize, Vec<usize>> = HashMap::new();
        for (t, d) in self.tris.iter().enumerate() {
            for &v in &d.vertices {
                by_vertex.entry(v).or_default().push(t);
            }
        }
        let partners: Vec<Vec<usize>> = (0..nt)
            .map(|t| {
                let mut p: Vec<usize> = self.tris[t]
                    .vertices
                    .iter()
                    .flat_map(|v| by_vertex[v].iter().copied())
                    .filter(|&u| u >= t)
                    .collect();
                p.sort_unstable();
                p.dedup();
                p
            })
            .collect();
        partners
            .par_iter()
            .enumerate()
            .flat_map_iter(|(t, ps)| ps.iter().map(move |&u| ((t, u), self.raw_moments(t, u))).collect::<Vec<_>>())
            .collect()
    }

    pub fn mesh(&self) -> &'m SurfaceMesh {
        self.mesh
    }

    pub fn physics(&self) -> &PhysicsParams {
        &self.physics
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        &self.quad
    }

    /// Moments of `G` for test triangle `ta` and source triangle `tb`.
    ///
    /// Always evaluated with the lower index as the test triangle, so the
    /// moments of `(a, b)` and `(b, a)` are exact transposes of each other and
    /// the assembled matrix is symmetric to rounding.
    pub fn pair_moments(&self, ta: usize, tb: usize) -> PairMoments {
        if ta > tb {
            return self.canonical_moments(tb, ta).swapped();
        }
        let m = self.canonical_moments(ta, tb);
        if ta == tb {
            let mut sr = [Complex64::new(0.0, 0.0); 3];
            for i in 0..3 {
                sr[i] = 0.5 * (m.sr[i] + m.sr_src[i]);
            }
            return PairMoments { s0: m.s0, sr, sr_src: sr, srr: m.srr };
        }
        m
    }

    fn canonical_moments(&self, ta: usize, tb: usize) -> PairMoments {
        match self.touching.get(&(ta, tb)) {
            Some(m) => *m,
            None => self.raw_moments(ta, tb),
        }
    }

    fn is_near(&self, ta: usize, tb: usize) -> bool {
        let a = &self.tris[ta];
        let b = &self.tris[tb];
        a.centroid.distance(&b.centroid) < self.quad.near_factor * a.size.max(b.size)
    }

    fn raw_moments(&self, ta: usize, tb: usize) -> PairMoments {
        let k = self.physics.wavenumber;
        let a = &self.tris[ta];
        let b = &self.tris[tb];
        let mut out = PairMoments::ZERO;
        if !self.is_near(ta, tb) {
            for &(r, wr) in &a.outer {
                let ra = r - a.centroid;
                let mut g0 = Complex64::new(0.0, 0.0);
                let mut g1 = [Complex64::new(0.0, 0.0); 3];
                for &(rp, wp) in &b.inner {
                    let dist = r.distance(&rp);
                    let (s, c) = (k * dist).sin_cos();
                    let g = Complex64::new(c, -s) * (wp / dist);
                    let rb = rp - b.centroid;
                    g0 += g;
                    for i in 0..3 {
                        g1[i] += g * rb.0[i];
                    }
                }
                accumulate(&mut out, wr / FOUR_PI, &ra, g0, &g1);
            }
            return out;
        }

        // The static potential of b has ρ·log ρ behaviour along b's edges and
        // corners. When those touch a, the test rule is graded towards the
        // common edge or vertex.
        let graded;
        let outer: &[(Vec3, f64)] = match shared_vertices(&a.vertices, &b.vertices) {
            (0, _) => &a.near_outer,
            (1, [i, ..]) => {
                graded = sample_rule(&self.vertex_rule.rotated(i), &a.points, a.area);
                &graded
            }
            (2, [i, j, _]) => {
                // local edge e runs from vertex e to vertex e + 1
                let e = if (i + 1) % 3 == j { i } else { j };
                graded = sample_rule(&self.edge_rule.rotated(e), &a.points, a.area);
                &graded
            }
            _ => {
                graded = sample_rule(&self.self_rule, &a.points, a.area);
                &graded
            }
        };
        let (k2, k4) = (0.5 * k * k, k.powi(4) / 24.0);
        for &(r, wr) in outer {
            let ra = r - a.centroid;
            let pot = b.frame.potential_integrals(&r);
            // closed-form part 1/R − k²R/2 + k⁴R³/24, relative to the source centroid
            let shift = pot.rho - b.centroid;
            let s_static = pot.scalar[0] - k2 * pot.scalar[1] + k4 * pot.scalar[2];
            let v_static = pot.vector[0] - pot.vector[1] * k2 + pot.vector[2] * k4;
            let mut g0 = Complex64::new(s_static, 0.0);
            let mut g1 = [Complex64::new(0.0, 0.0); 3];
            for i in 0..3 {
                g1[i] = Complex64::new(v_static.0[i] + shift.0[i] * s_static, 0.0);
            }
            // smooth remainder
            for &(rp, wp) in &b.inner {
                let dist = r.distance(&rp);
                let g = smooth_remainder(k, dist) * wp;
                let rb = rp - b.centroid;
                g0 += g;
                for i in 0..3 {
                    g1[i] += g * rb.0[i];
                }
            }
            accumulate(&mut out, wr / FOUR_PI, &ra, g0, &g1);
        }
        out
    }

    /// Contribution of a single triangle pair to `Z[m][n]`, given moments.
    #[inline]
    fn combine(&self, m: &PairMoments, ta: usize, sa: f64, va: usize, la: f64, tb: usize, sb: f64, vb: usize, lb: f64) -> Complex64 {
        let a = &self.tris[ta];
        let b = &self.tris[tb];
        let verts = self.mesh.vertices();
        let da = a.centroid - verts[va];
        let db = b.centroid - verts[vb];
        let mut dot = m.srr + m.s0 * da.dot(&db);
        for i in 0..3 {
            dot += m.sr[i] * db.0[i] + m.sr_src[i] * da.0[i];
        }
        let fa = sa * la / a.area;
        let fb = sb * lb / b.area;
        self.physics.vector_coef() * (0.25 * fa * fb) * dot + self.physics.scalar_coef() * (fa * fb) * m.s0
    }

    /// Single (test triangle, source triangle) term of `Z[m][n]`.
    pub fn pair_contribution(&self, m: usize, n: usize, ta: usize, tb: usize) -> Result<Complex64, KernelError> {
        let nb = self.mesh.num_bases();
        if m >= nb {
            return Err(KernelError::BadIndex(m));
        }
        if n >= nb {
            return Err(KernelError::BadIndex(n));
        }
        let (sa, va) = self.support_of(m, ta)?;
        let (sb, vb) = self.support_of(n, tb)?;
        let lm = self.mesh.bases()[m].length;
        let ln = self.mesh.bases()[n].length;
        let mom = self.pair_moments(ta, tb);
        Ok(self.combine(&mom, ta, sa, va, lm, tb, sb, vb, ln))
    }

    fn support_of(&self, basis: usize, tri: usize) -> Result<(f64, usize), KernelError> {
        self.mesh
            .support(basis)
            .iter()
            .find(|s| s.0 == tri)
            .map(|s| (s.1, s.2))
            .ok_or(KernelError::NotInSupport { basis, tri })
    }

    /// Full matrix entry `Z[m][n]`, the sum of its four pair contributions.
    pub fn entry(&self, m: usize, n: usize) -> Complex64 {
        let mut z = Complex64::new(0.0, 0.0);
        for (ta, _, _) in self.mesh.support(m) {
            for (tb, _, _) in self.mesh.support(n) {
                z += self.pair_contribution(m, n, ta, tb).expect("support triangles");
            }
        }
        z
    }

    /// Dense block `Z[rows][cols]`. Pair moments are computed once for every
    /// triangle pair touched by the block.
    pub fn fill_block(&self, rows: &[usize], cols: &[usize]) -> ComplexDenseBlock {
        let mut block = ComplexDenseBlock::zeros(rows.to_vec(), cols.to_vec());
        if rows.is_empty() || cols.is_empty() {
            return block;
        }
        let (row_tris, row_local) = self.local_triangles(rows);
        let (col_tris, col_local) = self.local_triangles(cols);
        let nct = col_tris.len();
        let mut moments = Vec::with_capacity(row_tris.len() * nct);
        for &ta in &row_tris {
            for &tb in &col_tris {
                moments.push(self.pair_moments(ta, tb));
            }
        }
        let bases = self.mesh.bases();
        for (i, &m) in rows.iter().enumerate() {
            let lm = bases[m].length;
            let sm = self.mesh.support(m);
            for (j, &n) in cols.iter().enumerate() {
                let ln = bases[n].length;
                let sn = self.mesh.support(n);
                let mut z = Complex64::new(0.0, 0.0);
                for (p, &(ta, sa, va)) in sm.iter().enumerate() {
                    for (q, &(tb, sb, vb)) in sn.iter().enumerate() {
                        let mom = &moments[row_local[i][p] * nct + col_local[j][q]];
                        z += self.combine(mom, ta, sa, va, lm, tb, sb, vb, ln);
                    }
                }
                *block.get_mut(i, j) = z;
            }
        }
        block
    }

    /// Distinct support triangles of `bases` and, per basis, the local index
    /// of its plus and minus triangle.
    fn local_triangles(&self, bases: &[usize]) -> (Vec<usize>, Vec<[usize; 2]>) {
        let mut tris: Vec<usize> = bases
            .iter()
            .flat_map(|&n| {
                let b = &self.mesh.bases()[n];
                [b.plus, b.minus]
            })
            .collect();
        tris.sort_unstable();
        tris.dedup();
        let local = bases
            .iter()
            .map(|&n| {
                let b = &self.mesh.bases()[n];
                [tris.binary_search(&b.plus).unwrap(), tris.binary_search(&b.minus).unwrap()]
            })
            .collect();
        (tris, local)
    }

    /// The full dense matrix, row-major.
    pub fn dense_matrix(&self) -> ComplexDenseBlock {
        let all: Vec<usize> = (0..self.mesh.num_bases()).collect();
        self.fill_block(&all, &all)
    }
}

impl EntryEvaluator for EfieKernel<'_> {
    fn size(&self) -> usize {
        self.mesh.num_bases()
    }

    fn fill(&self, rows: &[usize], cols: &[usize]) -> ComplexDenseBlock {
        self.fill_block(rows, cols)
    }

    fn is_symmetric(&self) -> bool {
        true
    }
}

fn sample_rule(rule: &TriangleRule, pts: &[Vec3; 3], area: f64) -> Vec<(Vec3, f64)> {
    rule.map(pts).zip(&rule.weights).map(|(p, w)| (p, w * area)).collect()
}

/// Number of common vertices and the local indices (in `a`) of them, sorted.
fn shared_vertices(a: &[usize; 3], b: &[usize; 3]) -> (usize, [usize; 3]) {
    let mut idx = [0usize; 3];
    let mut n = 0;
    for (i, v) in a.iter().enumerate() {
        if b.contains(v) {
            idx[n] = i;
            n += 1;
        }
    }
    (n, idx)
}

#[inline]
fn accumulate(out: &mut PairMoments, w: f64, ra: &Vec3, g0: Complex64, g1: &[Complex64; 3]) {
    out.s0 += g0 * w;
    let mut dot = Complex64::new(0.0, 0.0);
    for i in 0..3 {
        out.sr[i] += g0 * (w * ra.0[i]);
        out.sr_src[i] += g1[i] * w;
        dot += g1[i] * ra.0[i];
    }
    out.srr += dot * w;
}

/// `e^{−jkR}/R − (1/R − k²R/2 + k⁴R³/24)`, evaluated without cancellation.
/// The real part is `O(k⁶R⁵)` and the imaginary part `−sin(kR)/R` is smooth.
#[inline]
fn smooth_remainder(k: f64, dist: f64) -> Complex64 {
    let x = k * dist;
    let re = if x < 1.0 {
        // cos x − 1 + x²/2 − x⁴/24 = Σ_{n≥3} (−1)^n x^{2n}/(2n)!
        let x2 = x * x;
        let mut term = -x2 * x2 * x2 / 720.0;
        let mut sum = term;
        let mut n = 3.0;
        while term.abs() > 1e-18 * sum.abs() {
            term *= -x2 / ((2.0 * n + 1.0) * (2.0 * n + 2.0));
            sum += term;
            n += 1.0;
        }
        sum
    } else {
        let x2 = x * x;
        x.cos() - 1.0 + 0.5 * x2 - x2 * x2 / 24.0
    };
    let im = if x < 1e-8 { -x } else { -x.sin() };
    Complex64::new(re, im) / dist
}
