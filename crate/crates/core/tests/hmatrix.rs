mod common;

use common::{random_c, random_vec, rel_err, rng, C64};
use efie_core::efie::{ComplexDenseBlock, EfieKernel, EntryEvaluator, PhysicsParams, SPEED_OF_LIGHT};
use efie_core::geometry::{Aabb, Vec3};
use efie_core::hmatrix::{
    aca, admissible, build_block_structure, build_tree, recompress, AcaResult, BlockData, BlockKind, ClusterNode, HMatrix,
    HMatrixConfig, LowRankBlock,
};
use efie_core::mesh::{mesh_icosphere, mesh_plate};
use ndarray::Array2;
use proptest::prelude::*;

/// Entries served from an explicit row-major matrix.
struct Explicit {
    n: usize,
    m: usize,
    a: Vec<C64>,
}

impl EntryEvaluator for Explicit {
    fn size(&self) -> usize {
        self.n.max(self.m)
    }

    fn fill(&self, rows: &[usize], cols: &[usize]) -> ComplexDenseBlock {
        let mut b = ComplexDenseBlock::zeros(rows.to_vec(), cols.to_vec());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                *b.get_mut(i, j) = self.a[r * self.m + c];
            }
        }
        b
    }
}

fn product(u: &Array2<C64>, v: &Array2<C64>) -> Vec<C64> {
    u.dot(v).iter().copied().collect()
}

fn random_factors(seed: u64, n: usize, m: usize, r: usize) -> (Array2<C64>, Array2<C64>) {
    let mut g = rng(seed);
    let u = Array2::from_shape_fn((n, r), |_| random_c(&mut g));
    let v = Array2::from_shape_fn((r, m), |_| random_c(&mut g));
    (u, v)
}

fn node(lo: [f64; 3], hi: [f64; 3]) -> ClusterNode {
    let pts = [Vec3::new(lo[0], lo[1], lo[2]), Vec3::new(hi[0], hi[1], hi[2])];
    ClusterNode { triangles: (0, 1), bases: (0, 1), bbox: Aabb::from_points(pts.iter()), level: 0, children: None }
}

#[test]
fn admissibility_examples() {
    let a = node([0.0; 3], [1.0, 0.0, 0.0]);
    assert!(!admissible(&a, &a, 1e9));
    let touching = node([1.0, 0.0, 0.0], [2.0, 0.0, 0.0]);
    assert!(!admissible(&a, &touching, 1e9));
    let far = node([3.0, 0.0, 0.0], [4.0, 0.0, 0.0]);
    assert!(admissible(&a, &far, 1.0));
    assert!(!admissible(&a, &far, 0.49));
}

proptest! {
    #[test]
    fn admissibility_is_monotone_in_eta(gap in 0.0f64..5.0, w1 in 0.01f64..3.0, w2 in 0.01f64..3.0, eta in 0.0f64..4.0, more in 0.0f64..4.0) {
        let a = node([0.0; 3], [w1, w1, 0.0]);
        let b = node([w1 + gap, 0.0, 0.0], [w1 + gap + w2, w2, w2]);
        if admissible(&a, &b, eta) {
            prop_assert!(admissible(&a, &b, eta + more));
        }
    }
}

/// Every (test, source) basis pair must be covered by exactly one block.
fn coverage(h: &HMatrix) -> Vec<u8> {
    let n = h.size();
    let mut seen = vec![0u8; n * n];
    for b in h.blocks() {
        for i in b.rows.0..b.rows.1 {
            for j in b.cols.0..b.cols.1 {
                seen[i * n + j] += 1;
            }
        }
    }
    seen
}

#[test]
fn block_structure_tiles_the_plate_exactly_once() {
    let plate = mesh_plate(1.0, 1.0, 0.1).unwrap();
    for leaf in [30, 8] {
        let tree = build_tree(&plate, leaf).unwrap();
        let kernel = EfieKernel::new(tree.mesh(), PhysicsParams::new(SPEED_OF_LIGHT));
        let h = HMatrix::build(&tree, &kernel, &HMatrixConfig { leaf_size: leaf, ..Default::default() }).unwrap();
        assert!(coverage(&h).iter().all(|&c| c == 1), "leaf {leaf}");
        let area: usize = h.blocks().iter().map(|b| (b.rows.1 - b.rows.0) * (b.cols.1 - b.cols.0)).sum();
        assert_eq!(area, 280 * 280);
    }
}

#[test]
fn single_leaf_tree_has_one_dense_self_pair() {
    let ico = mesh_icosphere(1.0, 1).unwrap();
    let tree = build_tree(&ico, 30).unwrap();
    let pairs = build_block_structure(&tree, 1.0);
    assert_eq!(pairs.len(), 1);
    assert_eq!((pairs[0].test, pairs[0].source, pairs[0].kind), (0, 0, BlockKind::NearDense));
}

#[test]
fn zero_eta_gives_only_dense_leaf_pairs() {
    let tree = build_tree(&mesh_plate(1.0, 1.0, 0.1).unwrap(), 30).unwrap();
    let pairs = build_block_structure(&tree, 0.0);
    let leaves = tree.leaves().len();
    assert!(pairs.iter().all(|p| p.kind == BlockKind::NearDense));
    assert_eq!(pairs.len(), leaves * leaves);
}

#[test]
fn rank_one_block_is_found_in_one_step() {
    let (u, v) = random_factors(1, 12, 9, 1);
    let e = Explicit { n: 12, m: 9, a: product(&u, &v) };
    let rows: Vec<usize> = (0..12).collect();
    let cols: Vec<usize> = (0..9).collect();
    match aca(&e, &rows, &cols, 1e-3) {
        AcaResult::LowRank(lr) => {
            assert_eq!(lr.rank(), 1);
            assert!(rel_err(&product(&lr.u, &lr.v), &e.a) < 1e-12);
        }
        AcaResult::Stagnated => panic!("rank-1 block stagnated"),
    }
}

#[test]
fn random_rank_five_is_recovered() {
    for seed in 0..4 {
        let (n, m) = (60, 45);
        let (u, v) = random_factors(seed, n, m, 5);
        let e = Explicit { n, m, a: product(&u, &v) };
        let rows: Vec<usize> = (0..n).collect();
        let cols: Vec<usize> = (0..m).collect();
        match aca(&e, &rows, &cols, 1e-12) {
            AcaResult::LowRank(lr) => {
                assert!(lr.rank() <= 6, "rank {}", lr.rank());
                assert!(rel_err(&product(&lr.u, &lr.v), &e.a) < 1e-10);
            }
            AcaResult::Stagnated => panic!("seed {seed} stagnated"),
        }
    }
}

#[test]
fn recompression_finds_the_true_rank() {
    // twenty columns of U, all in the span of three
    let (u3, _) = random_factors(7, 40, 1, 3);
    let (mix, v) = random_factors(8, 3, 30, 20);
    let block = LowRankBlock { u: u3.dot(&mix), v };
    assert_eq!(block.rank(), 20);
    let dense = product(&block.u, &block.v);
    let r = recompress(&block, 1e-10);
    assert_eq!(r.rank(), 3);
    assert!(rel_err(&product(&r.u, &r.v), &dense) < 1e-9);
    assert!(r.stored() <= block.stored());
}

#[test]
fn recompression_keeps_an_orthogonal_rank_one_block() {
    let mut u = Array2::zeros((5, 1));
    u[[2, 0]] = C64::new(1.0, 0.0);
    let mut v = Array2::zeros((1, 4));
    v[[0, 1]] = C64::new(0.0, 3.0);
    let r = recompress(&LowRankBlock { u: u.clone(), v: v.clone() }, 1e-3);
    assert_eq!(r.rank(), 1);
    assert!(rel_err(&product(&r.u, &r.v), &product(&u, &v)) < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn recompression_never_grows_storage(seed in any::<u64>(), r in 1usize..12, tol in 1e-12f64..1e-1) {
        let (u, v) = random_factors(seed, 20, 16, r);
        let b = LowRankBlock { u, v };
        let c = recompress(&b, tol);
        prop_assert!(c.stored() <= b.stored());
        prop_assert!(c.rank() <= b.rank());
    }
}

fn plate_setup(leaf: usize) -> (efie_core::hmatrix::ClusterTree, HMatrixConfig) {
    let plate = mesh_plate(1.0, 1.0, 0.1).unwrap();
    (build_tree(&plate, leaf).unwrap(), HMatrixConfig { leaf_size: leaf, ..Default::default() })
}

#[test]
fn hmatvec_matches_dense_product() {
    for leaf in [30, 8] {
        let (tree, config) = plate_setup(leaf);
        let kernel = EfieKernel::new(tree.mesh(), PhysicsParams::new(SPEED_OF_LIGHT));
        let h = HMatrix::build(&tree, &kernel, &config).unwrap();
        if leaf == 8 {
            assert!(h.report().low_rank_blocks > 0);
        }
        let z = kernel.dense_matrix();
        let n = z.nrows();
        let mut g = rng(42);
        for _ in 0..10 {
            let x = random_vec(&mut g, n);
            let zx = common::dense_matvec(n, &z.entries, &x);
            let hx = h.matvec(&x).unwrap();
            assert!(rel_err(&hx, &zx) <= 1e-2, "leaf {leaf}: {}", rel_err(&hx, &zx));
        }
        assert_eq!(h.matvec(&vec![C64::new(0.0, 0.0); n]).unwrap(), vec![C64::new(0.0, 0.0); n]);
        assert!(h.matvec(&vec![C64::new(0.0, 0.0); n + 1]).is_err());
    }
}

#[test]
fn single_leaf_hmatvec_is_the_dense_product() {
    let ico = mesh_icosphere(0.3, 1).unwrap();
    let tree = build_tree(&ico, 30).unwrap();
    let kernel = EfieKernel::new(tree.mesh(), PhysicsParams::new(SPEED_OF_LIGHT));
    let h = HMatrix::build(&tree, &kernel, &HMatrixConfig::default()).unwrap();
    let z = kernel.dense_matrix();
    let x = random_vec(&mut rng(3), 30);
    assert!(rel_err(&h.matvec(&x).unwrap(), &common::dense_matvec(30, &z.entries, &x)) < 1e-14);
}

#[test]
fn admissible_efie_blocks_meet_the_tolerance() {
    let (tree, config) = plate_setup(8);
    let kernel = EfieKernel::new(tree.mesh(), PhysicsParams::new(SPEED_OF_LIGHT));
    let h = HMatrix::build(&tree, &kernel, &config).unwrap();
    let mut low_rank = 0;
    for b in h.blocks() {
        if let BlockData::LowRank(lr) = &b.data {
            let rows: Vec<usize> = (b.rows.0..b.rows.1).collect();
            let cols: Vec<usize> = (b.cols.0..b.cols.1).collect();
            let dense = kernel.fill_block(&rows, &cols);
            assert!(rel_err(&product(&lr.u, &lr.v), &dense.entries) <= 1e-2);
            low_rank += 1;
        }
    }
    assert!(low_rank > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn hmatvec_is_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let (tree, config) = plate_setup(8);
        let kernel = EfieKernel::new(tree.mesh(), PhysicsParams::new(SPEED_OF_LIGHT));
        let h = HMatrix::build(&tree, &kernel, &config).unwrap();
        let mut g = rng(seed);
        let (x, y) = (random_vec(&mut g, h.size()), random_vec(&mut g, h.size()));
        let (al, be) = (C64::new(a, 0.5), C64::new(0.3, b));
        let comb: Vec<C64> = x.iter().zip(&y).map(|(p, q)| al * p + be * q).collect();
        let (hx, hy) = (h.matvec(&x).unwrap(), h.matvec(&y).unwrap());
        let expect: Vec<C64> = hx.iter().zip(&hy).map(|(p, q)| al * p + be * q).collect();
        prop_assert!(rel_err(&h.matvec(&comb).unwrap(), &expect) <= 1e-12);
    }
}

#[test]
fn storage_per_unknown_grows_slowly() {
    let ratio = |side: f64| {
        let tree = build_tree(&mesh_plate(side, side, 0.1).unwrap(), 30).unwrap();
        let kernel = EfieKernel::new(tree.mesh(), PhysicsParams::new(SPEED_OF_LIGHT));
        let h = HMatrix::build(&tree, &kernel, &HMatrixConfig::default()).unwrap();
        h.stored_entries() as f64 / h.size() as f64
    };
    // below 2λ the default tree keeps everything dense
    let (small, large) = (ratio(2.0), ratio(4.0));
    assert!(large < 2.5 * small, "{small} -> {large}");
}
