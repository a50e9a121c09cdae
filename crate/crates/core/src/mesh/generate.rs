//! Structured test geometries: flat plates and geodesic spheres.

use super::{merge_vertices, MeshError, SurfaceMesh};
use crate::geometry::Vec3;

/// Largest geodesic frequency accepted by [`mesh_icosphere`] (20·ν² triangles).
pub const MAX_SPHERE_FREQUENCY: usize = 2048;

/// Mean-edge factor of a frequency-ν geodesic sphere: edge ≈ 1.2046·R/ν.
const SPHERE_EDGE_FACTOR: f64 = 1.204_6;

/// Plate of `side_x × side_y` meters in the z = 0 plane, centred on the
/// origin, with cells of edge length at most `h`.
pub fn mesh_plate(side_x: f64, side_y: f64, h: f64) -> Result<SurfaceMesh, MeshError> {
    if !(side_x > 0.0 && side_y > 0.0 && h > 0.0) {
        return Err(MeshError::InvalidParameter("plate sides and h must be positive".into()));
    }
    if h > side_x || h > side_y {
        return Err(MeshError::InvalidParameter(format!(
            "target edge length {h} exceeds plate side ({side_x} x {side_y})"
        )));
    }
    let nx = (side_x / h - 1e-9).ceil().max(1.0) as usize;
    let ny = (side_y / h - 1e-9).ceil().max(1.0) as usize;
    mesh_plate_cells(side_x, side_y, nx, ny)
}

/// Plate with an explicit `nx × ny` cell grid. Each cell is split along its
/// anti-diagonal and triangles are emitted row by row, two per cell, so that
/// consecutive triangles in a row share an edge.
pub fn mesh_plate_cells(side_x: f64, side_y: f64, nx: usize, ny: usize) -> Result<SurfaceMesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::InvalidParameter("plate needs at least one cell".into()));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vec3::new(
                side_x * (i as f64 / nx as f64 - 0.5),
                side_y * (j as f64 / ny as f64 - 0.5),
                0.0,
            ));
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            faces.push([a, b, d]);
            faces.push([b, c, d]);
        }
    }
    SurfaceMesh::new(vertices, faces)
}

/// Geodesic frequency used by [`mesh_sphere`] for a target edge length.
pub fn sphere_frequency(radius: f64, h: f64) -> usize {
    (SPHERE_EDGE_FACTOR * radius / h).ceil().max(1.0) as usize
}

/// Sphere of the given radius with mean edge length close to `h`.
pub fn mesh_sphere(radius: f64, h: f64) -> Result<SurfaceMesh, MeshError> {
    if !(radius > 0.0 && h > 0.0) {
        return Err(MeshError::InvalidParameter("sphere radius and h must be positive".into()));
    }
    let ratio = SPHERE_EDGE_FACTOR * radius / h;
    if !ratio.is_finite() || ratio > MAX_SPHERE_FREQUENCY as f64 {
        return Err(MeshError::SubdivisionOverflow(ratio.min(usize::MAX as f64) as usize));
    }
    mesh_icosphere(radius, sphere_frequency(radius, h))
}

/// Icosahedron with every face split into `frequency²` triangles, projected
/// onto the sphere. Frequency 1 is the plain icosahedron; frequency 2^k equals
/// k levels of midpoint subdivision.
pub fn mesh_icosphere(radius: f64, frequency: usize) -> Result<SurfaceMesh, MeshError> {
    if frequency == 0 || !(radius > 0.0) {
        return Err(MeshError::InvalidParameter("frequency and radius must be positive".into()));
    }
    if frequency > MAX_SPHERE_FREQUENCY {
        return Err(MeshError::SubdivisionOverflow(frequency));
    }
    let (ico_v, ico_f) = icosahedron();
    let nu = frequency;
    let mut points = Vec::new();
    let mut faces = Vec::new();
    for f in &ico_f {
        let (a, b, c) = (ico_v[f[0]], ico_v[f[1]], ico_v[f[2]]);
        let mut idx = vec![vec![0usize; nu + 1]; nu + 1];
        for j in 0..=nu {
            for i in 0..=(nu - j) {
                let p = a + (b - a) * (i as f64 / nu as f64) + (c - a) * (j as f64 / nu as f64);
                idx[j][i] = points.len();
                points.push(p.normalized() * radius);
            }
        }
        for j in 0..nu {
            for i in 0..(nu - j) {
                faces.push([idx[j][i], idx[j][i + 1], idx[j + 1][i]]);
                if i + j + 2 <= nu {
                    faces.push([idx[j][i + 1], idx[j + 1][i + 1], idx[j + 1][i]]);
                }
            }
        }
    }
    let (unique, map) = merge_vertices(&points, 1e-9 * radius);
    let faces: Vec<[usize; 3]> = faces
        .into_iter()
        .map(|f| {
            let mut g = [map[f[0]], map[f[1]], map[f[2]]];
            let n = (unique[g[1]] - unique[g[0]]).cross(&(unique[g[2]] - unique[g[0]]));
            let c = unique[g[0]] + unique[g[1]] + unique[g[2]];
            if n.dot(&c) < 0.0 {
                g.swap(1, 2);
            }
            g
        })
        .collect();
    SurfaceMesh::new(unique, faces)
}

/// Unit-circumradius icosahedron. Faces are found as the vertex triples at
/// mutual edge distance.
fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v = Vec::with_capacity(12);
    for &s1 in &[-1.0, 1.0] {
        for &s2 in &[-1.0, 1.0] {
            v.push(Vec3::new(0.0, s1, s2 * phi));
            v.push(Vec3::new(s1, s2 * phi, 0.0));
            v.push(Vec3::new(s2 * phi, 0.0, s1));
        }
    }
    let v: Vec<Vec3> = v.into_iter().map(|p| p.normalized()).collect();
    let edge = v.iter().skip(1).map(|p| p.distance(&v[0])).fold(f64::INFINITY, f64::min);
    let adjacent = |i: usize, j: usize| (v[i].distance(&v[j]) - edge).abs() < 1e-9;
    let mut faces = Vec::with_capacity(20);
    for i in 0..12 {
        for j in (i + 1)..12 {
            for k in (j + 1)..12 {
                if adjacent(i, j) && adjacent(j, k) && adjacent(i, k) {
                    faces.push([i, j, k]);
                }
            }
        }
    }
    (v, faces)
}
