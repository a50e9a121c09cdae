use std::collections::BTreeSet;

use efie_core::efie::{EfieKernel, PhysicsParams, SPEED_OF_LIGHT};
use efie_core::hmatrix::build_tree;
use efie_core::mesh::{mesh_icosphere, mesh_plate, mesh_plate_cells};
use efie_core::precond::{
    build_block_tridiagonal, build_tridiagonal, EntryMode, PrecondConfig, PrecondError, PrecondVariant, Preconditioner,
};
use num_complex::Complex64 as C64;

fn physics() -> PhysicsParams {
    PhysicsParams::new(SPEED_OF_LIGHT)
}

#[test]
fn middle_triangle_of_a_strip_reaches_seven_edges() {
    let plate = mesh_plate_cells(1.0, 1.0, 6, 6).unwrap();
    let kernel = EfieKernel::new(&plate, physics());
    let p = build_tridiagonal(&kernel, EntryMode::PartialPair).unwrap();
    // triangles 15, 16, 17 lie in an interior row and share edges pairwise
    let t = 16;
    let band: BTreeSet<usize> = (t - 1..=t + 1).flat_map(|u| plate.bases_on(u).iter().map(|b| b.basis)).collect();
    assert_eq!(band.len(), 7);
    let mut reached = BTreeSet::new();
    for on in plate.bases_on(t) {
        let (cols, _) = p.row(on.basis);
        reached.extend(cols.iter().copied().filter(|c| band.contains(c)));
    }
    assert_eq!(reached, band);
}

#[test]
fn tiny_trees_reproduce_the_dense_matrix() {
    // one leaf (icosahedron) and two leaves (a 40-triangle patch)
    for (mesh, leaves) in [(mesh_icosphere(0.3, 1).unwrap(), 1), (mesh_plate_cells(0.5, 0.4, 5, 4).unwrap(), 2)] {
        let tree = build_tree(&mesh, 30).unwrap();
        assert_eq!(tree.leaves().len(), leaves);
        let kernel = EfieKernel::new(tree.mesh(), physics());
        let z = kernel.dense_matrix();
        let n = z.nrows();
        let zmax = z.entries.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for mode in [EntryMode::PartialPair, EntryMode::FullEntry] {
            let p = build_block_tridiagonal(&tree, &kernel, mode).unwrap();
            assert_eq!(p.nnz(), n * n);
            for i in 0..n {
                for j in 0..n {
                    assert!((p.get(i, j).unwrap() - z.get(i, j)).norm() <= 1e-13 * zmax);
                }
            }
        }
    }
}

#[test]
fn full_entry_mode_stores_exact_entries() {
    let plate = mesh_plate(1.0, 1.0, 0.1).unwrap();
    let tree = build_tree(&plate, 30).unwrap();
    let kernel = EfieKernel::new(tree.mesh(), physics());
    for p in [
        build_tridiagonal(&kernel, EntryMode::FullEntry).unwrap(),
        build_block_tridiagonal(&tree, &kernel, EntryMode::FullEntry).unwrap(),
    ] {
        for i in 0..p.size() {
            let (cols, vals) = p.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                assert_eq!(v, kernel.entry(i, j));
            }
        }
    }
}

#[test]
fn partial_pairs_are_full_entries_inside_the_band() {
    let plate = mesh_plate(1.0, 1.0, 0.1).unwrap();
    let kernel = EfieKernel::new(&plate, physics());
    let p = build_tridiagonal(&kernel, EntryMode::PartialPair).unwrap();
    let mut inside = 0;
    for m in 0..p.size() {
        let (cols, vals) = p.row(m);
        for (&n, &v) in cols.iter().zip(vals) {
            let all_near = plate
                .support(m)
                .iter()
                .all(|a| plate.support(n).iter().all(|b| a.0.abs_diff(b.0) <= 1));
            let z = kernel.entry(m, n);
            if all_near {
                assert!((v - z).norm() <= 1e-12 * z.norm());
                inside += 1;
            } else {
                // some subset of the four pair terms
                let mut terms = Vec::new();
                for a in plate.support(m) {
                    for b in plate.support(n) {
                        terms.push(kernel.pair_contribution(m, n, a.0, b.0).unwrap());
                    }
                }
                let matches = (1u32..16).any(|mask| {
                    let s: C64 = (0..4).filter(|k| mask & (1 << k) != 0).map(|k| terms[k]).sum();
                    (s - v).norm() <= 1e-12 * v.norm().max(z.norm())
                });
                assert!(matches, "({m}, {n}) is not a partial sum of its pair terms");
            }
        }
    }
    assert!(inside > 0);
}

#[test]
fn patterns_are_symmetric_and_nested() {
    for mesh in [mesh_plate(2.0, 1.0, 0.1).unwrap(), mesh_icosphere(0.5, 5).unwrap()] {
        let tree = build_tree(&mesh, 30).unwrap();
        let kernel = EfieKernel::new(tree.mesh(), physics());
        let tri = build_tridiagonal(&kernel, EntryMode::PartialPair).unwrap();
        let block = build_block_tridiagonal(&tree, &kernel, EntryMode::PartialPair).unwrap();
        let n = tri.size();
        assert!(tri.pattern_is_symmetric() && block.pattern_is_symmetric());
        assert!(tri.nnz() <= block.nnz() && block.nnz() <= n * n);
        for i in 0..n {
            for &j in tri.row(i).0 {
                assert!(block.get(i, j).is_some());
            }
        }
    }
}

#[test]
fn file_order_plate_matches_published_count() {
    let plate = mesh_plate(1.0, 1.0, 0.1).unwrap();
    assert_eq!(plate.num_bases(), 280);
    let p = build_tridiagonal(&EfieKernel::new(&plate, physics()), EntryMode::PartialPair).unwrap();
    assert_eq!(p.nnz(), 2688);
}

#[test]
fn factorization_does_not_lose_entries() {
    let plate = mesh_plate(2.0, 2.0, 0.1).unwrap();
    let tree = build_tree(&plate, 30).unwrap();
    let kernel = EfieKernel::new(tree.mesh(), physics());
    for variant in [PrecondVariant::TriTridiagonal, PrecondVariant::BlockTridiagonal] {
        let pc = Preconditioner::build(&tree, &kernel, &PrecondConfig::new(variant)).unwrap();
        assert!(pc.lu.fill_nnz() >= pc.matrix.nnz());
        let b: Vec<C64> = (0..pc.matrix.size()).map(|i| C64::new((i % 5) as f64, 1.0)).collect();
        let x = pc.apply(&b).unwrap();
        let r = pc.matrix.matvec(&x).unwrap();
        let err: f64 = r.iter().zip(&b).map(|(a, c)| (a - c).norm_sqr()).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-10 * nb);
    }
}

#[test]
fn kernel_on_another_mesh_is_rejected() {
    let plate = mesh_plate(1.0, 1.0, 0.1).unwrap();
    let tree = build_tree(&plate, 30).unwrap();
    let kernel = EfieKernel::new(&plate, physics());
    let config = PrecondConfig::new(PrecondVariant::BlockTridiagonal);
    assert!(matches!(Preconditioner::build(&tree, &kernel, &config), Err(PrecondError::MeshMismatch)));
}
