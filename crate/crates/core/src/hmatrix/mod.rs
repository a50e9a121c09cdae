//! Hierarchical-matrix representation of the system matrix.
//!
//! A [`ClusterTree`] splits the triangles into nested boxes. Pairs of tree
//! nodes that satisfy the admissibility rule `η·dist ≥ min(diam)` become
//! low-rank blocks (ACA followed by SVD recompression); inadmissible leaf
//! pairs are stored densely. Block row and column sets are the basis ranges
//! owned by the nodes, so the blocks tile the `N × N` index space.

mod aca;
mod tree;

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::efie::{ComplexDenseBlock, EntryEvaluator};
use crate::mesh::MeshError;

pub use aca::{aca, recompress, truncate_dense, AcaResult, LowRankBlock};
pub use tree::{build_tree, ClusterNode, ClusterTree, DEFAULT_LEAF_SIZE};

#[derive(Debug, Error)]
pub enum HMatrixError {
    #[error("cannot build a cluster tree for an empty mesh")]
    EmptyMesh,
    #[error("{triangles} triangles have coincident centroids and cannot be split")]
    DegenerateCluster { triangles: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("vector length {got} does not match matrix size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockKind {
    NearDense,
    FarLowRank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockPair {
    pub test: usize,
    pub source: usize,
    pub kind: BlockKind,
    pub level: usize,
}

/// `η·dist(t, s) ≥ min(diam(t), diam(s))` on the node boxes. `dist` is the
/// gap between the boxes, zero when they touch or overlap.
pub fn admissible(t: &ClusterNode, s: &ClusterNode, eta: f64) -> bool {
    let dist = t.bbox.distance(&s.bbox);
    eta * dist >= t.bbox.diameter().min(s.bbox.diameter()) && dist > 0.0
}

/// Top-down dual traversal from `(root, root)`. Admissible pairs stop the
/// recursion as low-rank blocks; inadmissible leaf pairs become dense blocks.
/// Pairs where either node owns no basis are dropped.
pub fn build_block_structure(tree: &ClusterTree, eta: f64) -> Vec<BlockPair> {
    let mut out = Vec::new();
    let mut stack = vec![(tree.root(), tree.root())];
    while let Some((t, s)) = stack.pop() {
        let (nt, ns) = (tree.node(t), tree.node(s));
        if nt.num_bases() == 0 || ns.num_bases() == 0 {
            continue;
        }
        let level = nt.level.max(ns.level);
        if admissible(nt, ns, eta) {
            out.push(BlockPair { test: t, source: s, kind: BlockKind::FarLowRank, level });
            continue;
        }
        match (nt.children, ns.children) {
            (None, None) => out.push(BlockPair { test: t, source: s, kind: BlockKind::NearDense, level }),
            (Some(ct), None) => stack.extend(ct.iter().rev().map(|&c| (c, s))),
            (None, Some(cs)) => stack.extend(cs.iter().rev().map(|&c| (t, c))),
            (Some(ct), Some(cs)) => {
                for &a in ct.iter().rev() {
                    for &b in cs.iter().rev() {
                        stack.push((a, b));
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HMatrixConfig {
    pub eta: f64,
    pub tol: f64,
    pub leaf_size: usize,
}

impl Default for HMatrixConfig {
    fn default() -> Self {
        HMatrixConfig { eta: 1.0, tol: 1e-3, leaf_size: DEFAULT_LEAF_SIZE }
    }
}

#[derive(Debug, Clone)]
pub enum BlockData {
    Dense(ComplexDenseBlock),
    LowRank(LowRankBlock),
}

#[derive(Debug, Clone)]
pub struct HBlock {
    pub pair: BlockPair,
    pub rows: (usize, usize),
    pub cols: (usize, usize),
    pub data: BlockData,
}

impl HBlock {
    pub fn stored(&self) -> usize {
        match &self.data {
            BlockData::Dense(d) => d.entries.len(),
            BlockData::LowRank(l) => l.stored(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HMatrix {
    n: usize,
    tol: f64,
    blocks: Vec<HBlock>,
    /// Blocks that were admissible but stored densely after ACA stagnated.
    fallbacks: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelCount {
    pub dense: usize,
    pub low_rank: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompressionReport {
    pub n: usize,
    pub tol: f64,
    pub dense_blocks: usize,
    pub low_rank_blocks: usize,
    pub dense_fallbacks: usize,
    pub per_level: BTreeMap<usize, LevelCount>,
    pub rank_histogram: BTreeMap<usize, usize>,
    pub stored_entries: usize,
    pub dense_entries: usize,
    pub memory_ratio: f64,
    pub stored_bytes: usize,
}

impl HMatrix {
    /// Assembles the H-matrix of `eval` over the bases of `tree`'s mesh.
    pub fn build<E: EntryEvaluator>(tree: &ClusterTree, eval: &E, config: &HMatrixConfig) -> Result<HMatrix, HMatrixError> {
        if !(config.tol > 0.0 && config.tol < 1.0) {
            return Err(HMatrixError::InvalidParameter(format!("tolerance {} outside (0, 1)", config.tol)));
        }
        if !(config.eta >= 0.0) {
            return Err(HMatrixError::InvalidParameter(format!("eta {} must be non-negative", config.eta)));
        }
        let n = tree.mesh().num_bases();
        if eval.size() != n {
            return Err(HMatrixError::LengthMismatch { expected: n, got: eval.size() });
        }
        let pairs = build_block_structure(tree, config.eta);
        // with a symmetric operator only blocks on or above the diagonal are
        // computed; the others are transposed copies
        let symmetric = eval.is_symmetric();
        let computed: Vec<(BlockData, bool)> = pairs
            .par_iter()
            .map(|&pair| {
                let rows = tree.node(pair.test).bases;
                let cols = tree.node(pair.source).bases;
                if symmetric && rows.0 > cols.0 {
                    return (BlockData::Dense(ComplexDenseBlock::zeros(Vec::new(), Vec::new())), false);
                }
                let ri: Vec<usize> = (rows.0..rows.1).collect();
                let ci: Vec<usize> = (cols.0..cols.1).collect();
                match pair.kind {
                    BlockKind::NearDense => (BlockData::Dense(eval.fill(&ri, &ci)), false),
                    BlockKind::FarLowRank => match aca(eval, &ri, &ci, config.tol) {
                        AcaResult::LowRank(lr) => (BlockData::LowRank(recompress(&lr, config.tol)), false),
                        AcaResult::Stagnated => (BlockData::Dense(eval.fill(&ri, &ci)), true),
                    },
                }
            })
            .collect();
        let index: HashMap<((usize, usize), (usize, usize)), usize> = pairs
            .iter()
            .enumerate()
            .map(|(i, p)| ((tree.node(p.test).bases, tree.node(p.source).bases), i))
            .collect();
        let mut results: Vec<(HBlock, bool)> = Vec::with_capacity(pairs.len());
        for (i, &pair) in pairs.iter().enumerate() {
            let rows = tree.node(pair.test).bases;
            let cols = tree.node(pair.source).bases;
            let (data, fallback) = if symmetric && rows.0 > cols.0 {
                let (data, fallback) = &computed[index[&(cols, rows)]];
                let t = match data {
                    BlockData::Dense(d) => BlockData::Dense(d.transposed()),
                    BlockData::LowRank(l) => BlockData::LowRank(LowRankBlock { u: l.v.t().to_owned(), v: l.u.t().to_owned() }),
                };
                (t, *fallback)
            } else {
                computed[i].clone()
            };
            results.push((HBlock { pair, rows, cols, data }, fallback));
        }
        let fallbacks = results.iter().filter(|r| r.1).count();
        let blocks = results.into_iter().map(|r| r.0).collect();
        Ok(HMatrix { n, tol: config.tol, blocks, fallbacks })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn blocks(&self) -> &[HBlock] {
        &self.blocks
    }

    pub fn stored_entries(&self) -> usize {
        self.blocks.iter().map(HBlock::stored).sum()
    }

    /// `y = H·x`.
    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>, HMatrixError> {
        if x.len() != self.n {
            return Err(HMatrixError::LengthMismatch { expected: self.n, got: x.len() });
        }
        let zero = Complex64::new(0.0, 0.0);
        let y = self
            .blocks
            .par_iter()
            .fold(
                || vec![zero; self.n],
                |mut acc, b| {
                    let xs = &x[b.cols.0..b.cols.1];
                    let ys = &mut acc[b.rows.0..b.rows.1];
                    match &b.data {
                        BlockData::Dense(d) => d.matvec_add(xs, ys),
                        BlockData::LowRank(l) => l.matvec_add(xs, ys),
                    }
                    acc
                },
            )
            .reduce(
                || vec![zero; self.n],
                |mut a, b| {
                    for (p, q) in a.iter_mut().zip(b) {
                        *p += q;
                    }
                    a
                },
            );
        Ok(y)
    }

    /// Per-level block counts, rank histogram and memory relative to dense.
    pub fn report(&self) -> CompressionReport {
        let mut per_level: BTreeMap<usize, LevelCount> = BTreeMap::new();
        let mut ranks: BTreeMap<usize, usize> = BTreeMap::new();
        let (mut dense, mut low) = (0, 0);
        for b in &self.blocks {
            let e = per_level.entry(b.pair.level).or_insert(LevelCount { dense: 0, low_rank: 0 });
            match &b.data {
                BlockData::Dense(_) => {
                    dense += 1;
                    e.dense += 1;
                }
                BlockData::LowRank(l) => {
                    low += 1;
                    e.low_rank += 1;
                    *ranks.entry(l.rank()).or_default() += 1;
                }
            }
        }
        let stored = self.stored_entries();
        let full = self.n * self.n;
        CompressionReport {
            n: self.n,
            tol: self.tol,
            dense_blocks: dense,
            low_rank_blocks: low,
            dense_fallbacks: self.fallbacks,
            per_level,
            rank_histogram: ranks,
            stored_entries: stored,
            dense_entries: full,
            memory_ratio: stored as f64 / full.max(1) as f64,
            stored_bytes: stored * std::mem::size_of::<Complex64>(),
        }
    }
}
