//! Sparse preconditioners assembled from near interactions.
//!
//! Both variants group the triangles into a linear sequence of groups and
//! keep the interactions between neighbouring groups. For the tridiagonal
//! variant every triangle is its own group; for the block variant the groups
//! are the cluster-tree leaves. A test basis belongs to every group holding
//! one of its two support triangles.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::efie::EfieKernel;
use crate::hmatrix::ClusterTree;
use crate::sparse::{FillOrdering, LuConfig, SparseComplexMatrix, SparseError, SparseLu};

#[derive(Debug, Error)]
pub enum PrecondError {
    #[error("cannot build a preconditioner for an empty mesh")]
    EmptyMesh,
    #[error("the kernel and the cluster tree refer to different meshes")]
    MeshMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecondVariant {
    TriTridiagonal,
    BlockTridiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryMode {
    /// Sum only the triangle-pair terms whose triangles are neighbours.
    PartialPair,
    /// Store the complete matrix entry for every position in the pattern.
    FullEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecondConfig {
    pub variant: PrecondVariant,
    pub entry_mode: EntryMode,
    pub pivot_threshold: f64,
    pub fill_ordering: FillOrdering,
}

impl PrecondConfig {
    /// Partial pair sums for both variants. Masking complete entries to the
    /// banded pattern tends to give a nearly singular matrix.
    ///
    /// The tridiagonal pattern is a planar-like graph once bases straddling
    /// two leaves are counted, and nested dissection keeps its fill close to
    /// linear; AMD fills less on the denser block pattern.
    pub fn new(variant: PrecondVariant) -> Self {
        let fill_ordering = match variant {
            PrecondVariant::TriTridiagonal => FillOrdering::NestedDissection,
            PrecondVariant::BlockTridiagonal => FillOrdering::Amd,
        };
        PrecondConfig { variant, entry_mode: EntryMode::PartialPair, pivot_threshold: 0.1, fill_ordering }
    }

    pub fn with_entry_mode(mut self, mode: EntryMode) -> Self {
        self.entry_mode = mode;
        self
    }

    fn lu_config(&self) -> Result<LuConfig, PrecondError> {
        if !(self.pivot_threshold > 0.0 && self.pivot_threshold <= 1.0) {
            return Err(PrecondError::InvalidParameter(format!("pivot threshold {} outside (0, 1]", self.pivot_threshold)));
        }
        Ok(LuConfig { ordering: self.fill_ordering, pivot_threshold: self.pivot_threshold, ..LuConfig::default() })
    }
}

/// Triangles `a` and `b` interact when `|a − b| ≤ 1` in the mesh order.
pub fn build_tridiagonal(kernel: &EfieKernel<'_>, mode: EntryMode) -> Result<SparseComplexMatrix, PrecondError> {
    let nt = kernel.mesh().num_triangles();
    if nt == 0 || kernel.mesh().num_bases() == 0 {
        return Err(PrecondError::EmptyMesh);
    }
    let groups: Vec<(usize, usize)> = (0..nt).map(|t| (t, t + 1)).collect();
    Ok(build_banded(kernel, &groups, mode))
}

/// Leaves `i` and `j` of `tree` interact when `|i − j| ≤ 1`. The kernel must
/// be built on `tree.mesh()`.
pub fn build_block_tridiagonal(
    tree: &ClusterTree,
    kernel: &EfieKernel<'_>,
    mode: EntryMode,
) -> Result<SparseComplexMatrix, PrecondError> {
    if !std::ptr::eq(tree.mesh(), kernel.mesh()) {
        return Err(PrecondError::MeshMismatch);
    }
    if kernel.mesh().num_bases() == 0 {
        return Err(PrecondError::EmptyMesh);
    }
    let groups: Vec<(usize, usize)> = tree.leaves().iter().map(|&l| tree.node(l).triangles).collect();
    Ok(build_banded(kernel, &groups, mode))
}

/// `groups` are consecutive half-open triangle ranges covering the mesh.
fn build_banded(kernel: &EfieKernel<'_>, groups: &[(usize, usize)], mode: EntryMode) -> SparseComplexMatrix {
    let mesh = kernel.mesh();
    let bases_of = |g: (usize, usize)| -> Vec<usize> {
        let mut v: Vec<usize> = (g.0..g.1).flat_map(|t| mesh.bases_on(t).iter().map(|b| b.basis)).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let k = groups.len();
    let triplets: Vec<(usize, usize, Complex64)> = (0..k)
        .into_par_iter()
        .flat_map_iter(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(k - 1);
            let mut out = Vec::new();
            match mode {
                EntryMode::FullEntry => {
                    let rows = bases_of(groups[i]);
                    let mut cols: Vec<usize> = (lo..=hi).flat_map(|j| bases_of(groups[j])).collect();
                    cols.sort_unstable();
                    cols.dedup();
                    let block = kernel.fill_block(&rows, &cols);
                    for (a, &m) in rows.iter().enumerate() {
                        for (b, &n) in cols.iter().enumerate() {
                            out.push((m, n, block.get(a, b)));
                        }
                    }
                }
                EntryMode::PartialPair => {
                    let (src_lo, src_hi) = (groups[lo].0, groups[hi].1);
                    for ta in groups[i].0..groups[i].1 {
                        for tb in src_lo..src_hi {
                            for bm in mesh.bases_on(ta) {
                                for bn in mesh.bases_on(tb) {
                                    let z = kernel.pair_contribution(bm.basis, bn.basis, ta, tb).expect("support triangles");
                                    out.push((bm.basis, bn.basis, z));
                                }
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();
    let triplets = match mode {
        // a full entry can be produced by two groups; keep one copy
        EntryMode::FullEntry => {
            let mut t = triplets;
            t.par_sort_unstable_by_key(|&(m, n, _)| (m, n));
            t.dedup_by_key(|&mut (m, n, _)| (m, n));
            t
        }
        EntryMode::PartialPair => triplets,
    };
    SparseComplexMatrix::from_triplets(mesh.num_bases(), triplets).expect("basis indices in range")
}

/// Sparse LU of an assembled preconditioner.
pub fn factorize(p: &SparseComplexMatrix, config: &PrecondConfig) -> Result<SparseLu, PrecondError> {
    Ok(SparseLu::factor(p, &config.lu_config()?)?)
}

/// An assembled and factored preconditioner with its timings.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    pub config: PrecondConfig,
    pub matrix: SparseComplexMatrix,
    pub lu: SparseLu,
    pub build_seconds: f64,
    pub factor_seconds: f64,
}

impl Preconditioner {
    /// Builds the configured variant on `tree.mesh()`. `kernel` must be
    /// built on that mesh.
    pub fn build(tree: &ClusterTree, kernel: &EfieKernel<'_>, config: &PrecondConfig) -> Result<Preconditioner, PrecondError> {
        let start = Instant::now();
        let matrix = match config.variant {
            PrecondVariant::TriTridiagonal => {
                if !std::ptr::eq(tree.mesh(), kernel.mesh()) {
                    return Err(PrecondError::MeshMismatch);
                }
                build_tridiagonal(kernel, config.entry_mode)?
            }
            PrecondVariant::BlockTridiagonal => build_block_tridiagonal(tree, kernel, config.entry_mode)?,
        };
        let build_seconds = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let lu = factorize(&matrix, config)?;
        Ok(Preconditioner { config: *config, matrix, lu, build_seconds, factor_seconds: start.elapsed().as_secs_f64() })
    }

    pub fn apply(&self, b: &[Complex64]) -> Result<Vec<Complex64>, SparseError> {
        self.lu.apply(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efie::PhysicsParams;
    use crate::mesh::SurfaceMesh;
    use crate::geometry::Vec3;

    fn strip() -> SurfaceMesh {
        // three triangles in a row: t0, t1, t2 with t1 in the middle
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.5, 1.0, 0.0),
            Vec3::new(1.5, 1.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ];
        SurfaceMesh::new(v, vec![[0, 1, 2], [1, 3, 2], [1, 4, 3]]).unwrap()
    }

    #[test]
    fn two_triangles_give_the_full_entry() {
        let v = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.0, 1.0, 0.0)];
        let mesh = SurfaceMesh::new(v, vec![[0, 1, 2], [1, 3, 2]]).unwrap();
        let kernel = EfieKernel::new(&mesh, PhysicsParams::new(1e8));
        for mode in [EntryMode::PartialPair, EntryMode::FullEntry] {
            let p = build_tridiagonal(&kernel, mode).unwrap();
            assert_eq!(p.nnz(), 1);
            let z = kernel.entry(0, 0);
            assert!((p.get(0, 0).unwrap() - z).norm() <= 1e-14 * z.norm());
        }
    }

    #[test]
    fn strip_pattern_is_symmetric() {
        let mesh = strip();
        let kernel = EfieKernel::new(&mesh, PhysicsParams::new(1e8));
        let p = build_tridiagonal(&kernel, EntryMode::PartialPair).unwrap();
        assert_eq!(p.size(), 2);
        assert_eq!(p.nnz(), 4);
        assert!(p.pattern_is_symmetric());
    }
}
