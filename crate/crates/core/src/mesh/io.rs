//! Mesh file formats.
//!
//! Two formats are read and written:
//!
//! * Gmsh MSH 2.2 ASCII. Only `$Nodes` and `$Elements` are used; elements of
//!   type 2 (3-node triangle) are kept and every other element type is skipped.
//! * `rawtri`, a plain text format. Blank lines and lines starting with `#`
//!   are ignored. The first data line holds `<vertex count> <triangle count>`,
//!   followed by one `x y z` line per vertex and one `i j k` line per triangle
//!   with zero-based vertex indices.
//!
//! Coincident vertices (closer than [`VERTEX_MERGE_TOL`]) are welded on load.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{merge_vertices, MeshError, SurfaceMesh, VERTEX_MERGE_TOL};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Msh2,
    Rawtri,
}

impl MeshFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<MeshFormat> {
        match path.extension()?.to_str()? {
            "msh" => Some(MeshFormat::Msh2),
            "tri" | "rawtri" | "txt" => Some(MeshFormat::Rawtri),
            _ => None,
        }
    }
}

impl FromStr for MeshFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "msh2" | "msh" => Ok(MeshFormat::Msh2),
            "rawtri" | "tri" => Ok(MeshFormat::Rawtri),
            other => Err(format!("unknown mesh format `{other}` (expected msh2 or rawtri)")),
        }
    }
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<SurfaceMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    match format {
        MeshFormat::Msh2 => parse_msh2(&text),
        MeshFormat::Rawtri => parse_rawtri(&text),
    }
}

fn weld(points: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<SurfaceMesh, MeshError> {
    for (i, p) in points.iter().enumerate() {
        if !p.is_finite() {
            return Err(MeshError::NonFinite(i));
        }
    }
    let (unique, map) = merge_vertices(&points, VERTEX_MERGE_TOL);
    let faces = faces.into_iter().map(|f| [map[f[0]], map[f[1]], map[f[2]]]).collect();
    SurfaceMesh::new(unique, faces)
}

fn parse_err(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse { line, msg: msg.into() }
}

fn parse_num<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, MeshError> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("invalid {what} `{tok}`")))
}

pub fn parse_rawtri(text: &str) -> Result<SurfaceMesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, header) = lines.next().ok_or_else(|| parse_err(0, "empty file"))?;
    let mut it = header.split_whitespace();
    let nv: usize = parse_num(it.next(), ln, "vertex count")?;
    let nt: usize = parse_num(it.next(), ln, "triangle count")?;
    let mut points = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "unexpected end of vertex list"))?;
        let mut it = l.split_whitespace();
        let x = parse_num(it.next(), ln, "x")?;
        let y = parse_num(it.next(), ln, "y")?;
        let z = parse_num(it.next(), ln, "z")?;
        points.push(Vec3::new(x, y, z));
    }
    let mut faces = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "unexpected end of triangle list"))?;
        let mut it = l.split_whitespace();
        let mut f = [0usize; 3];
        for v in f.iter_mut() {
            *v = parse_num(it.next(), ln, "vertex index")?;
            if *v >= nv {
                return Err(parse_err(ln, format!("vertex index {v} out of range")));
            }
        }
        faces.push(f);
    }
    weld(points, faces)
}

pub fn parse_msh2(text: &str) -> Result<SurfaceMesh, MeshError> {
    let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).collect();
    let mut pos = 0;
    let mut node_ids: HashMap<usize, usize> = HashMap::new();
    let mut points = Vec::new();
    let mut raw_faces: Vec<([usize; 3], usize)> = Vec::new();
    let mut saw_nodes = false;
    let mut saw_elements = false;
    while pos < lines.len() {
        let (ln, l) = lines[pos];
        pos += 1;
        match l {
            "$MeshFormat" => {
                let (ln, fmt) = *lines.get(pos).ok_or_else(|| parse_err(ln, "truncated $MeshFormat"))?;
                let mut it = fmt.split_whitespace();
                let version: f64 = parse_num(it.next(), ln, "format version")?;
                let file_type: u32 = parse_num(it.next(), ln, "file type")?;
                if !(2.0..3.0).contains(&version) {
                    return Err(parse_err(ln, format!("unsupported MSH version {version}")));
                }
                if file_type != 0 {
                    return Err(parse_err(ln, "binary MSH files are not supported"));
                }
            }
            "$Nodes" => {
                saw_nodes = true;
                let (ln, c) = *lines.get(pos).ok_or_else(|| parse_err(ln, "truncated $Nodes"))?;
                pos += 1;
                let count: usize = parse_num(Some(c), ln, "node count")?;
                for _ in 0..count {
                    let (ln, l) = *lines.get(pos).ok_or_else(|| parse_err(ln, "truncated node list"))?;
                    pos += 1;
                    let mut it = l.split_whitespace();
                    let id: usize = parse_num(it.next(), ln, "node id")?;
                    let x = parse_num(it.next(), ln, "x")?;
                    let y = parse_num(it.next(), ln, "y")?;
                    let z = parse_num(it.next(), ln, "z")?;
                    node_ids.insert(id, points.len());
                    points.push(Vec3::new(x, y, z));
                }
            }
            "$Elements" => {
                saw_elements = true;
                let (ln, c) = *lines.get(pos).ok_or_else(|| parse_err(ln, "truncated $Elements"))?;
                pos += 1;
                let count: usize = parse_num(Some(c), ln, "element count")?;
                for _ in 0..count {
                    let (ln, l) = *lines.get(pos).ok_or_else(|| parse_err(ln, "truncated element list"))?;
                    pos += 1;
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    let etype: u32 = parse_num(toks.get(1).copied(), ln, "element type")?;
                    if etype != 2 {
                        continue;
                    }
                    let ntags: usize = parse_num(toks.get(2).copied(), ln, "tag count")?;
                    let mut f = [0usize; 3];
                    for (k, v) in f.iter_mut().enumerate() {
                        *v = parse_num(toks.get(3 + ntags + k).copied(), ln, "triangle node")?;
                    }
                    raw_faces.push((f, ln));
                }
            }
            _ => {}
        }
    }
    if !saw_nodes || !saw_elements {
        return Err(parse_err(lines.len(), "missing $Nodes or $Elements section"));
    }
    let mut faces = Vec::with_capacity(raw_faces.len());
    for (f, ln) in raw_faces {
        let mut g = [0usize; 3];
        for k in 0..3 {
            g[k] = *node_ids
                .get(&f[k])
                .ok_or_else(|| parse_err(ln, format!("unknown node id {}", f[k])))?;
        }
        faces.push(g);
    }
    weld(points, faces)
}

pub fn write_rawtri(mesh: &SurfaceMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# rawtri");
    let _ = writeln!(s, "{} {}", mesh.vertices().len(), mesh.num_triangles());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", v.x(), v.y(), v.z());
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t.vertices[0], t.vertices[1], t.vertices[2]);
    }
    s
}

pub fn write_msh2(mesh: &SurfaceMesh) -> String {
    let mut s = String::from("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.vertices().len());
    for (i, v) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(s, "{} {:.17e} {:.17e} {:.17e}", i + 1, v.x(), v.y(), v.z());
    }
    s.push_str("$EndNodes\n$Elements\n");
    let _ = writeln!(s, "{}", mesh.num_triangles());
    for (i, t) in mesh.triangles().iter().enumerate() {
        let v = t.vertices;
        let _ = writeln!(s, "{} 2 2 0 1 {} {} {}", i + 1, v[0] + 1, v[1] + 1, v[2] + 1);
    }
    s.push_str("$EndElements\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rawtri_welds_duplicates() {
        let text = "# two triangles with a duplicated edge\n6 2\n0 0 0\n1 0 0\n0 1 0\n1 0 0\n1 1 0\n0 1 0.0000000000001\n0 1 2\n3 4 5\n";
        let m = parse_rawtri(text).unwrap();
        assert_eq!(m.vertices().len(), 4);
        assert_eq!(m.num_bases(), 1);
    }

    #[test]
    fn rawtri_reports_bad_index_line() {
        let err = parse_rawtri("3 1\n0 0 0\n1 0 0\n0 1 0\n0 1 7\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 5, .. }), "{err}");
    }

    #[test]
    fn msh2_skips_non_triangle_elements() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n10 0 0 0\n11 1 0 0\n12 1 1 0\n13 0 1 0\n$EndNodes\n$Elements\n4\n1 15 2 0 1 10\n2 1 2 0 1 10 11\n3 2 2 0 1 10 11 12\n4 2 2 0 1 10 12 13\n$EndElements\n";
        let m = parse_msh2(text).unwrap();
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(m.num_bases(), 1);
    }

    #[test]
    fn msh2_rejects_binary() {
        let text = "$MeshFormat\n2.2 1 8\n$EndMeshFormat\n";
        assert!(parse_msh2(text).is_err());
    }
}
