//! Binary cluster tree over mesh triangles.

use serde::Serialize;

use super::HMatrixError;
use crate::geometry::{Aabb, Vec3};
use crate::mesh::SurfaceMesh;

/// Default leaf capacity, counted in triangles.
pub const DEFAULT_LEAF_SIZE: usize = 30;

#[derive(Debug, Clone, Serialize)]
pub struct ClusterNode {
    /// Half-open triangle range in leaf order.
    pub triangles: (usize, usize),
    /// Half-open basis range: the bases whose plus triangle lies in
    /// `triangles`.
    pub bases: (usize, usize),
    /// Box around the member triangles and the full support of the owned
    /// bases.
    pub bbox: Aabb,
    pub level: usize,
    pub children: Option<[usize; 2]>,
}

impl ClusterNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.1 - self.triangles.0
    }

    pub fn num_bases(&self) -> usize {
        self.bases.1 - self.bases.0
    }
}

/// Cluster tree together with the mesh renumbered into leaf order.
#[derive(Debug, Clone)]
pub struct ClusterTree {
    nodes: Vec<ClusterNode>,
    leaves: Vec<usize>,
    leaf_size: usize,
    /// `permutation[new] = old` triangle index of the input mesh.
    permutation: Vec<usize>,
    mesh: SurfaceMesh,
}

impl ClusterTree {
    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, id: usize) -> &ClusterNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[ClusterNode] {
        &self.nodes
    }

    /// Leaf node ids from left to right.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    /// The mesh with triangles renumbered into leaf order.
    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    /// `permutation()[new] = old` for triangles of the input mesh.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// `inverse[old] = new`.
    pub fn inverse_permutation(&self) -> Vec<usize> {
        let mut inv = vec![0; self.permutation.len()];
        for (new, &old) in self.permutation.iter().enumerate() {
            inv[old] = new;
        }
        inv
    }
}

/// Recursive median bisection along the longest axis of the centroid box.
/// Nodes with at most `leaf_size` triangles become leaves.
pub fn build_tree(mesh: &SurfaceMesh, leaf_size: usize) -> Result<ClusterTree, HMatrixError> {
    if mesh.num_triangles() == 0 {
        return Err(HMatrixError::EmptyMesh);
    }
    if leaf_size == 0 {
        return Err(HMatrixError::InvalidParameter("leaf size must be at least 1".into()));
    }
    let centroids: Vec<Vec3> = mesh.triangles().iter().map(|t| t.centroid).collect();
    let mut order: Vec<usize> = (0..mesh.num_triangles()).collect();
    // (start, end, level, parent slot)
    let mut raw: Vec<((usize, usize), usize, Option<[usize; 2]>)> = Vec::new();
    let mut stack = vec![(0usize, order.len(), 0usize, None::<(usize, usize)>)];
    while let Some((start, end, level, parent)) = stack.pop() {
        let id = raw.len();
        raw.push(((start, end), level, None));
        if let Some((p, slot)) = parent {
            let ch = raw[p].2.get_or_insert([usize::MAX; 2]);
            ch[slot] = id;
        }
        if end - start <= leaf_size {
            continue;
        }
        let slice = &mut order[start..end];
        let cbox = Aabb::from_points(slice.iter().map(|&t| &centroids[t]));
        if cbox.diameter() == 0.0 {
            return Err(HMatrixError::DegenerateCluster { triangles: end - start });
        }
        let axis = cbox.longest_axis();
        slice.sort_by(|&a, &b| centroids[a].0[axis].total_cmp(&centroids[b].0[axis]).then(a.cmp(&b)));
        let mid = start + (end - start) / 2;
        // right child pushed first so the left subtree is numbered first
        stack.push((mid, end, level + 1, Some((id, 1))));
        stack.push((start, mid, level + 1, Some((id, 0))));
    }

    let neighbours = edge_neighbours(mesh);
    for &((s, e), _, children) in &raw {
        if children.is_none() {
            walk_leaf(&mut order[s..e], &neighbours, &centroids);
        }
    }

    let reordered = mesh.reorder_triangles(&order)?;
    let bases = reordered.bases();
    // first basis whose plus triangle is >= t
    let basis_start = |t: usize| bases.partition_point(|b| b.plus < t);

    let mut nodes: Vec<ClusterNode> = raw
        .iter()
        .map(|&((s, e), level, children)| ClusterNode {
            triangles: (s, e),
            bases: (basis_start(s), basis_start(e)),
            bbox: Aabb::empty(),
            level,
            children,
        })
        .collect();
    for node in nodes.iter_mut() {
        let mut b = Aabb::empty();
        for t in node.triangles.0..node.triangles.1 {
            for p in reordered.triangle_points(t) {
                b.insert(&p);
            }
        }
        for n in node.bases.0..node.bases.1 {
            for p in reordered.triangle_points(bases[n].minus) {
                b.insert(&p);
            }
        }
        node.bbox = b;
    }
    let leaves = collect_leaves(&nodes);
    Ok(ClusterTree { nodes, leaves, leaf_size, permutation: order, mesh: reordered })
}

fn edge_neighbours(mesh: &SurfaceMesh) -> Vec<Vec<usize>> {
    let mut nb = vec![Vec::new(); mesh.num_triangles()];
    for b in mesh.bases() {
        nb[b.plus].push(b.minus);
        nb[b.minus].push(b.plus);
    }
    nb
}

/// Reorders a leaf so that consecutive triangles share an edge wherever
/// possible: a greedy walk that always steps to the unvisited neighbour with
/// the fewest unvisited neighbours, restarting at the nearest unvisited
/// triangle when stuck.
fn walk_leaf(leaf: &mut [usize], neighbours: &[Vec<usize>], centroids: &[Vec3]) {
    let n = leaf.len();
    if n <= 2 {
        return;
    }
    let members: Vec<usize> = leaf.to_vec();
    let local = |t: usize| members.iter().position(|&m| m == t);
    let adj: Vec<Vec<usize>> = members.iter().map(|&t| neighbours[t].iter().filter_map(|&u| local(u)).collect()).collect();
    let mut visited = vec![false; n];
    let free = |i: usize, visited: &[bool]| adj[i].iter().filter(|&&j| !visited[j]).count();
    let mut out = Vec::with_capacity(n);
    let mut current = (0..n).min_by_key(|&i| (adj[i].len(), i)).unwrap();
    loop {
        visited[current] = true;
        out.push(members[current]);
        if out.len() == n {
            break;
        }
        let step = adj[current].iter().copied().filter(|&j| !visited[j]).min_by_key(|&j| (free(j, &visited), j));
        current = match step {
            Some(j) => j,
            None => {
                let c = centroids[members[current]];
                (0..n)
                    .filter(|&j| !visited[j])
                    .min_by(|&a, &b| {
                        let da = (centroids[members[a]] - c).norm();
                        let db = (centroids[members[b]] - c).norm();
                        da.total_cmp(&db).then(a.cmp(&b))
                    })
                    .unwrap()
            }
        };
    }
    leaf.copy_from_slice(&out);
}

fn collect_leaves(nodes: &[ClusterNode]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        match nodes[id].children {
            None => out.push(id),
            Some([l, r]) => {
                stack.push(r);
                stack.push(l);
            }
        }
    }
    out
}
