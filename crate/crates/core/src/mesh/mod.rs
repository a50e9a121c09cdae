//! Triangulated PEC surfaces and their RWG edge basis.
//!
//! A [`SurfaceMesh`] owns the vertex and triangle arrays together with the
//! list of interior edges. Every interior edge shared by exactly two triangles
//! carries one RWG basis function, so `mesh.num_bases()` is the number of MoM
//! unknowns. Boundary edges carry no unknown.
//!
//! The basis list is kept in a canonical order: the plus triangle is the lower
//! triangle index of the pair and bases are sorted by `(plus, minus)`. With
//! this convention a contiguous triangle range owns a contiguous range of
//! bases, which the cluster tree relies on.

mod generate;
mod io;

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{Aabb, Vec3};

pub use generate::{mesh_icosphere, mesh_plate, mesh_plate_cells, mesh_sphere, sphere_frequency};
pub use io::{load_mesh, parse_msh2, parse_rawtri, write_msh2, write_rawtri, MeshFormat};

/// Tolerance used when welding coincident vertices.
pub const VERTEX_MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("non-manifold edge ({0}, {1}) shared by {2} triangles")]
    NonManifold(usize, usize, usize),
    #[error("triangle {0} is degenerate (zero area or repeated vertex)")]
    Degenerate(usize),
    #[error("triangle {tri} references vertex {vertex} but only {count} vertices exist")]
    BadVertex { tri: usize, vertex: usize, count: usize },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("invalid mesh parameter: {0}")]
    InvalidParameter(String),
    #[error("sphere subdivision frequency {0} exceeds the supported maximum")]
    SubdivisionOverflow(usize),
    #[error("permutation of length {got} does not match {expected} triangles")]
    BadPermutation { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub area: f64,
    pub centroid: Vec3,
    /// Unit normal following the vertex winding.
    pub normal: Vec3,
}

/// One RWG basis function, attached to an interior edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RwgBasis {
    /// The two vertices of the shared edge, ascending.
    pub edge: [usize; 2],
    pub plus: usize,
    pub minus: usize,
    /// Vertex of the plus triangle opposite the edge.
    pub plus_free: usize,
    /// Vertex of the minus triangle opposite the edge.
    pub minus_free: usize,
    pub length: f64,
}

/// A basis function as seen from one of its two support triangles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisOnTriangle {
    pub basis: usize,
    /// +1 on the plus triangle, -1 on the minus triangle.
    pub sign: f64,
    pub free_vertex: usize,
}

#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<Triangle>,
    bases: Vec<RwgBasis>,
    tri_bases: Vec<Vec<BasisOnTriangle>>,
    bbox: Aabb,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshStats {
    pub vertices: usize,
    pub triangles: usize,
    pub edges: usize,
    pub boundary_edges: usize,
    pub rwg_bases: usize,
    pub bbox_min: [f64; 3],
    pub bbox_max: [f64; 3],
    pub min_edge_length: f64,
    pub max_edge_length: f64,
    pub mean_edge_length: f64,
    pub total_area: f64,
}

impl SurfaceMesh {
    /// Builds and validates a mesh from raw arrays.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(MeshError::NonFinite(i));
            }
        }
        let mut triangles = Vec::with_capacity(faces.len());
        for (t, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= vertices.len() {
                    return Err(MeshError::BadVertex { tri: t, vertex: v, count: vertices.len() });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::Degenerate(t));
            }
            let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
            let n = (b - a).cross(&(c - a));
            let twice_area = n.norm();
            let scale = (b - a).norm_sqr().max((c - a).norm_sqr());
            if !(twice_area > 1e-14 * scale) {
                return Err(MeshError::Degenerate(t));
            }
            triangles.push(Triangle {
                vertices: *f,
                area: 0.5 * twice_area,
                centroid: (a + b + c) * (1.0 / 3.0),
                normal: n * (1.0 / twice_area),
            });
        }

        let mut edge_map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri.vertices[k], tri.vertices[(k + 1) % 3]);
                edge_map.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        let mut shared: Vec<((usize, usize), usize, usize)> = Vec::new();
        for (&(a, b), tris) in &edge_map {
            match tris.len() {
                1 => {}
                2 => {
                    let (p, m) = (tris[0].min(tris[1]), tris[0].max(tris[1]));
                    if p == m {
                        return Err(MeshError::Degenerate(p));
                    }
                    shared.push(((a, b), p, m));
                }
                n => return Err(MeshError::NonManifold(a, b, n)),
            }
        }
        shared.sort_by_key(|&(e, p, m)| (p, m, e));

        let opposite = |t: usize, a: usize, b: usize| -> usize {
            *triangles[t].vertices.iter().find(|&&v| v != a && v != b).expect("edge belongs to triangle")
        };
        let bases: Vec<RwgBasis> = shared
            .iter()
            .map(|&((a, b), p, m)| RwgBasis {
                edge: [a, b],
                plus: p,
                minus: m,
                plus_free: opposite(p, a, b),
                minus_free: opposite(m, a, b),
                length: vertices[a].distance(&vertices[b]),
            })
            .collect();

        let mut tri_bases = vec![Vec::with_capacity(3); triangles.len()];
        for (n, b) in bases.iter().enumerate() {
            tri_bases[b.plus].push(BasisOnTriangle { basis: n, sign: 1.0, free_vertex: b.plus_free });
            tri_bases[b.minus].push(BasisOnTriangle { basis: n, sign: -1.0, free_vertex: b.minus_free });
        }

        let bbox = Aabb::from_points(vertices.iter());
        Ok(SurfaceMesh { vertices, triangles, bases, tri_bases, bbox })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn bases(&self) -> &[RwgBasis] {
        &self.bases
    }

    /// Number of RWG unknowns.
    pub fn num_bases(&self) -> usize {
        self.bases.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn bounding_box(&self) -> Aabb {
        self.bbox
    }

    /// Bases supported on triangle `t` (at most three).
    pub fn bases_on(&self, t: usize) -> &[BasisOnTriangle] {
        &self.tri_bases[t]
    }

    /// Vertex positions of triangle `t`.
    pub fn triangle_points(&self, t: usize) -> [Vec3; 3] {
        let v = self.triangles[t].vertices;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    /// The two support triangles of basis `n` as `(triangle, sign, free vertex)`.
    pub fn support(&self, n: usize) -> [(usize, f64, usize); 2] {
        let b = &self.bases[n];
        [(b.plus, 1.0, b.plus_free), (b.minus, -1.0, b.minus_free)]
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| t.area).sum()
    }

    /// Counts every geometric edge, interior or not.
    pub fn edge_count(&self) -> usize {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t.vertices[k], t.vertices[(k + 1) % 3])))
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    pub fn is_closed(&self) -> bool {
        self.edge_count() == self.num_bases()
    }

    /// Applies a triangle permutation, `perm[new] = old`, rebuilding the basis
    /// list in canonical order. Geometry is untouched.
    pub fn reorder_triangles(&self, perm: &[usize]) -> Result<SurfaceMesh, MeshError> {
        if perm.len() != self.triangles.len() {
            return Err(MeshError::BadPermutation { expected: self.triangles.len(), got: perm.len() });
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || seen[p] {
                return Err(MeshError::InvalidParameter("triangle permutation is not a bijection".into()));
            }
            seen[p] = true;
        }
        let faces = perm.iter().map(|&old| self.triangles[old].vertices).collect();
        SurfaceMesh::new(self.vertices.clone(), faces)
    }

    /// Uniform scaling of all coordinates.
    pub fn scaled(&self, s: f64) -> SurfaceMesh {
        let verts = self.vertices.iter().map(|v| *v * s).collect();
        let faces = self.triangles.iter().map(|t| t.vertices).collect();
        SurfaceMesh::new(verts, faces).expect("scaling preserves validity")
    }

    pub fn stats(&self) -> MeshStats {
        let mut min_e = f64::INFINITY;
        let mut max_e: f64 = 0.0;
        let mut sum = 0.0;
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t.vertices[k], t.vertices[(k + 1) % 3])))
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        for &(a, b) in &edges {
            let l = self.vertices[a].distance(&self.vertices[b]);
            min_e = min_e.min(l);
            max_e = max_e.max(l);
            sum += l;
        }
        MeshStats {
            vertices: self.vertices.len(),
            triangles: self.triangles.len(),
            edges: edges.len(),
            boundary_edges: edges.len() - self.bases.len(),
            rwg_bases: self.bases.len(),
            bbox_min: self.bbox.min.0,
            bbox_max: self.bbox.max.0,
            min_edge_length: if edges.is_empty() { 0.0 } else { min_e },
            max_edge_length: max_e,
            mean_edge_length: if edges.is_empty() { 0.0 } else { sum / edges.len() as f64 },
            total_area: self.total_area(),
        }
    }
}

/// Linear triangle orderings understood by the preconditioner builders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriangleOrdering {
    /// Triangles in the order the mesher produced them.
    FileOrder,
    /// Triangles grouped by cluster-tree leaf, leaves left to right.
    TreeLeafOrder,
}

/// Welds points closer than `tol`. Returns the unique points and the map from
/// input index to output index.
pub fn merge_vertices(points: &[Vec3], tol: f64) -> (Vec<Vec3>, Vec<usize>) {
    let cell = |p: &Vec3| -> [i64; 3] {
        [(p.0[0] / tol).floor() as i64, (p.0[1] / tol).floor() as i64, (p.0[2] / tol).floor() as i64]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut unique: Vec<Vec3> = Vec::new();
    let mut map = Vec::with_capacity(points.len());
    for p in points {
        let c = cell(p);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &id in ids {
                            if unique[id].distance(p) <= tol {
                                found = Some(id);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        let id = match found {
            Some(id) => id,
            None => {
                unique.push(*p);
                grid.entry(c).or_default().push(unique.len() - 1);
                unique.len() - 1
            }
        };
        map.push(id);
    }
    (unique, map)
}
