mod common;

use common::C64;
use efie_core::efie::{
    excitation, excitation_with_degree, EfieKernel, PhysicsParams, PlaneWave, Polarization, QuadratureConfig, SPEED_OF_LIGHT,
};
use efie_core::geometry::Vec3;
use efie_core::mesh::{mesh_icosphere, mesh_plate, mesh_plate_cells, SurfaceMesh};
use proptest::prelude::*;

const J: C64 = C64::new(0.0, 1.0);

fn lambda_one() -> PhysicsParams {
    PhysicsParams::new(SPEED_OF_LIGHT)
}

fn max_asymmetry(z: &efie_core::efie::ComplexDenseBlock) -> f64 {
    let n = z.nrows();
    let zmax = z.entries.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((z.get(i, j) - z.get(j, i)).norm());
        }
    }
    worst / zmax
}

#[test]
fn icosahedron_block_is_symmetric() {
    let mesh = mesh_icosphere(0.2, 1).unwrap();
    let k = EfieKernel::new(&mesh, lambda_one());
    let z = k.dense_matrix();
    assert_eq!(z.nrows(), 30);
    assert!(max_asymmetry(&z) <= 1e-12);
}

#[test]
fn galerkin_symmetry_on_plate_and_sphere() {
    for mesh in [mesh_plate(1.0, 1.0, 0.1).unwrap(), mesh_icosphere(0.5, 4).unwrap()] {
        assert!(mesh.num_bases() <= 500);
        let z = EfieKernel::new(&mesh, lambda_one()).dense_matrix();
        assert!(max_asymmetry(&z) <= 1e-10, "asymmetry {}", max_asymmetry(&z));
    }
}

#[test]
fn one_by_one_block_is_the_entry() {
    let mesh = mesh_plate_cells(0.5, 0.5, 3, 3).unwrap();
    let k = EfieKernel::new(&mesh, lambda_one());
    for (m, n) in [(0, 0), (3, 7), (10, 2)] {
        assert_eq!(k.fill_block(&[m], &[n]).get(0, 0), k.entry(m, n));
    }
}

/// Scaling the geometry by `s` and the frequency by `1/s` scales every entry
/// by `s²` with length-normalised RWG functions.
#[test]
fn electrical_scale_invariance() {
    let mesh = mesh_icosphere(0.3, 3).unwrap();
    let z1 = EfieKernel::new(&mesh, lambda_one()).dense_matrix();
    for s in [0.01, 7.0] {
        let scaled = mesh.scaled(s);
        let zs = EfieKernel::new(&scaled, PhysicsParams::new(SPEED_OF_LIGHT / s)).dense_matrix();
        let diff: Vec<C64> = zs.entries.iter().zip(&z1.entries).map(|(a, b)| a / (s * s) - b).collect();
        assert!(common::norm(&diff) <= 1e-10 * common::norm(&z1.entries), "s = {s}");
    }
}

/// Two one-basis patches 10λ apart: every triangle pair is replaced by a
/// single centroid-to-centroid sample of the Green's function.
#[test]
fn far_entry_matches_point_approximation() {
    let h = 0.05;
    let square = |x0: f64| vec![
        Vec3::new(x0, 0.0, 0.0),
        Vec3::new(x0 + h, 0.0, 0.0),
        Vec3::new(x0 + h, h, 0.0),
        Vec3::new(x0, h, 0.0),
    ];
    for (dx, tilt) in [(10.0, 0.0), (12.0, 0.03)] {
        let mut v = square(0.0);
        let mut far = square(dx);
        for p in far.iter_mut() {
            *p = Vec3::new(p.x(), p.y(), tilt * (p.x() - dx) / h);
        }
        v.extend(far);
        let mesh = SurfaceMesh::new(v, vec![[0, 1, 3], [1, 2, 3], [4, 5, 7], [5, 6, 7]]).unwrap();
        assert_eq!(mesh.num_bases(), 2);
        let phys = lambda_one();
        let (k, eta) = (phys.wavenumber, phys.wave_impedance);
        let exact = EfieKernel::new(&mesh, phys).entry(0, 1);
        let mut approx = C64::new(0.0, 0.0);
        for (ta, sa, fa) in mesh.support(0) {
            for (tb, sb, fb) in mesh.support(1) {
                let (a, b) = (&mesh.triangles()[ta], &mesh.triangles()[tb]);
                let (la, lb) = (mesh.bases()[0].length, mesh.bases()[1].length);
                let ja = (a.centroid - mesh.vertices()[fa]) * (sa * la / 2.0);
                let jb = (b.centroid - mesh.vertices()[fb]) * (sb * lb / 2.0);
                let r = a.centroid.distance(&b.centroid);
                let g = (-J * k * r).exp() / (4.0 * std::f64::consts::PI * r);
                approx += (J * k * eta * ja.dot(&jb) - J * (eta / k) * (sa * la) * (sb * lb)) * g;
            }
        }
        let rel = (exact.norm() - approx.norm()).abs() / approx.norm();
        assert!(rel <= 0.05, "dx = {dx}: |Z| = {} vs point value {}", exact.norm(), approx.norm());
    }
}

#[test]
fn self_entries_survive_doubled_quadrature() {
    // edges close to a tenth of a wavelength
    let mesh = mesh_icosphere(0.3, 4).unwrap();
    let phys = lambda_one();
    let base = EfieKernel::new(&mesh, phys);
    let fine = EfieKernel::with_quadrature(&mesh, phys, QuadratureConfig::default().doubled());
    for m in (0..mesh.num_bases()).step_by(13) {
        let (a, b) = (base.entry(m, m), fine.entry(m, m));
        assert!(a.re.is_finite() && a.im.is_finite());
        assert!((a - b).norm() <= 1e-6 * b.norm(), "basis {m}: {a} vs {b}");
    }
}

#[test]
fn self_triangle_pair_term_survives_doubled_quadrature() {
    let mesh = mesh_plate(0.4, 0.4, 0.1).unwrap();
    let phys = lambda_one();
    let base = EfieKernel::new(&mesh, phys);
    let fine = EfieKernel::with_quadrature(&mesh, phys, QuadratureConfig::default().doubled());
    let m = mesh.num_bases() / 2;
    let t = mesh.bases()[m].plus;
    let (a, b) = (base.pair_contribution(m, m, t, t).unwrap(), fine.pair_contribution(m, m, t, t).unwrap());
    assert!((a - b).norm() <= 1e-6 * b.norm());
}

#[test]
fn non_touching_entries_converge_under_refinement() {
    let mesh = mesh_plate(1.0, 1.0, 0.1).unwrap();
    let phys = lambda_one();
    let base = EfieKernel::new(&mesh, phys);
    let fine = EfieKernel::with_quadrature(&mesh, phys, QuadratureConfig::default().refined(2));
    let verts = |m: usize| -> Vec<usize> {
        mesh.support(m).iter().flat_map(|s| mesh.triangles()[s.0].vertices).collect()
    };
    let mut checked = 0;
    for m in (0..mesh.num_bases()).step_by(7) {
        for n in (0..mesh.num_bases()).step_by(11) {
            let vm = verts(m);
            if verts(n).iter().any(|v| vm.contains(v)) {
                continue;
            }
            let (a, b) = (base.entry(m, n), fine.entry(m, n));
            assert!((a - b).norm() < 1e-4 * b.norm(), "({m}, {n}): {a} vs {b}");
            checked += 1;
        }
    }
    assert!(checked > 500);
}

#[test]
fn excitation_is_linear_in_amplitude() {
    let mesh = mesh_icosphere(1.0, 4).unwrap();
    let phys = lambda_one();
    let w = PlaneWave::new(0.7, 1.9, Polarization::HH);
    let b1 = excitation(&mesh, &phys, &w);
    let b2 = excitation(&mesh, &phys, &w.with_amplitude(2.0));
    for (x, y) in b1.iter().zip(&b2) {
        assert_eq!(*y, *x * 2.0);
    }
}

/// Square grid with every cell split into four triangles at its centre, so
/// each horizontal edge is mirrored by its two triangles.
fn cross_split_plate(n: usize, side: f64) -> SurfaceMesh {
    let h = side / n as f64;
    let mut v = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            v.push(Vec3::new(i as f64 * h, j as f64 * h, 0.0));
        }
    }
    let corner = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let c = v.len();
            v.push(Vec3::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, 0.0));
            let (a, b, cc, d) = (corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1));
            faces.extend([[a, b, c], [b, cc, c], [cc, d, c], [d, a, c]]);
        }
    }
    SurfaceMesh::new(v, faces).unwrap()
}

#[test]
fn normal_incidence_does_not_drive_edges_along_the_field() {
    let mesh = cross_split_plate(6, 1.0);
    let phys = lambda_one();
    // (θ, φ) = (0, 0) VV: E along x̂
    let b = excitation(&mesh, &phys, &PlaneWave::new(0.0, 0.0, Polarization::VV));
    let bmax = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut along = 0;
    for (m, basis) in mesh.bases().iter().enumerate() {
        let e = mesh.vertices()[basis.edge[1]] - mesh.vertices()[basis.edge[0]];
        if e.y().abs() < 1e-12 {
            assert!(b[m].norm() <= 1e-12 * bmax, "edge {m} parallel to E carries {}", b[m]);
            along += 1;
        }
    }
    assert_eq!(along, 6 * 5);
}

#[test]
fn doubling_the_excitation_rule_changes_little() {
    let mesh = mesh_icosphere(1.0, 8).unwrap();
    let phys = lambda_one();
    let w = PlaneWave::new(1.1, 0.4, Polarization::VV);
    let b7 = excitation(&mesh, &phys, &w);
    let b14 = excitation_with_degree(&mesh, &phys, &w, 14);
    let (n7, n14) = (common::norm(&b7), common::norm(&b14));
    assert!((n7 - n14).abs() < 1e-8 * n14, "relative change {}", (n7 - n14).abs() / n14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn entry_is_the_sum_of_its_pair_terms(m in 0usize..270, n in 0usize..270) {
        let mesh = mesh_icosphere(0.4, 3).unwrap();
        let k = EfieKernel::new(&mesh, lambda_one());
        let mut sum = C64::new(0.0, 0.0);
        for (ta, _, _) in mesh.support(m) {
            for (tb, _, _) in mesh.support(n) {
                let z = k.pair_contribution(m, n, ta, tb).unwrap();
                prop_assert!(z.re.is_finite() && z.im.is_finite());
                sum += z;
            }
        }
        let z = k.entry(m, n);
        prop_assert!((z - sum).norm() <= 1e-12 * z.norm());
    }
}
