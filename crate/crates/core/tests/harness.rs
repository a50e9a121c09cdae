use std::process::Command;

use efie_core::harness::*;
use efie_core::precond::PrecondVariant;

fn row(tpc: f64, nitr: f64, tpcsol: f64, tmmv: f64) -> CostModelInput {
    CostModelInput { tpc, nitr, nrhs: 180.0, tpcsol, tmmv }
}

fn hours(input: &CostModelInput) -> f64 {
    cost_model(input) / 3600.0
}

#[test]
fn cost_model_unit_and_degenerate_cases() {
    let unit = CostModelInput { tpc: 0.0, nitr: 1.0, nrhs: 1.0, tpcsol: 0.0, tmmv: 1.0 };
    assert_eq!(cost_model(&unit), 1.0);
    let no_rhs = CostModelInput { tpc: 12.5, nitr: 40.0, nrhs: 0.0, tpcsol: 3.0, tmmv: 4.0 };
    assert_eq!(cost_model(&no_rhs), 12.5);
}

#[test]
fn cost_model_on_published_rows() {
    // 20λ plate, tridiagonal: the model gives 3.085 h against a printed 3.1384 h.
    let plate_td = row(63.8798, 80.0, 0.063675, 0.703204);
    assert!((cost_model(&plate_td) - 11106.9374).abs() < 1e-6);
    assert!((hours(&plate_td) - 3.1384).abs() > 0.05);

    // Rows whose printed totals the model reproduces.
    let consistent = [
        (row(273.7414, 89.0, 0.309779, 0.703204), 4.5838),
        (row(75.9628, 762.0, 0.221020, 1.450142), 63.6923),
        (row(801.7663, 711.0, 0.079829, 1.450142), 54.6131),
        (row(842.6682, 843.0, 0.611366, 1.450142), 87.1266),
    ];
    for (input, printed) in consistent {
        assert!((hours(&input) - printed).abs() < 5e-3, "{} vs {printed}", hours(&input));
    }

    let ilut = row(273.7414, 89.0, 0.309779, 0.703204);
    assert!((speedup(&ilut, &plate_td) - 1.486).abs() < 1e-3);
}

#[test]
fn slope_fitter() {
    let x = [1.0, 2.0, 4.0, 8.0];
    assert!(loglog_slope(&x, &[3.0; 4]).unwrap().abs() < 1e-12);
    let y: Vec<f64> = x.iter().map(|v| 5.0 * v * v).collect();
    assert!((loglog_slope(&x, &y).unwrap() - 2.0).abs() < 1e-12);
    assert!(loglog_slope(&x, &[1.0, 0.0, 1.0, 1.0]).is_none());
    assert!(loglog_slope(&[2.0, 2.0], &[1.0, 3.0]).is_none());
}

#[test]
fn sweep_rejects_bad_sizes() {
    assert!(matches!(bench_sweep(&[1.0, 2.0, 3.0], PrecondVariant::TriTridiagonal, 1), Err(HarnessError::Config(_))));
    assert!(matches!(
        bench_sweep(&[1.0, 2.0, 2.0, 3.0], PrecondVariant::TriTridiagonal, 1),
        Err(HarnessError::Config(_))
    ));
}

#[test]
fn run_config_round_trips() {
    let mut config = RunConfig::new(Geometry::Sphere { radius_wavelengths: 0.5, subdivisions: Some(4) });
    config.leaf_size = 12;
    let text = serde_json::to_string(&config).unwrap();
    let back: RunConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back.geometry, config.geometry);
    assert_eq!(back.leaf_size, 12);
    assert_eq!(serde_json::to_string(&back).unwrap(), text);

    let legacy: Geometry = serde_json::from_str(r#"{"kind":"sphere","radius_wavelengths":1.0}"#).unwrap();
    assert_eq!(legacy, Geometry::Sphere { radius_wavelengths: 1.0, subdivisions: None });
}

#[test]
fn invalid_configurations_are_rejected() {
    let mut config = RunConfig::new(Geometry::Plate { side_wavelengths: 1.0 });
    config.leaf_size = 0;
    assert!(config.validate().is_err());
    let config = RunConfig::new(Geometry::Plate { side_wavelengths: -1.0 });
    assert!(config.mesh().is_err());
    let config = RunConfig::new(Geometry::File { path: "/nonexistent/mesh.msh".into() });
    assert!(config.validate().is_err());
}

#[test]
fn residual_csv_layout() {
    assert_eq!(residuals_csv(&[0.5, 0.25]).lines().collect::<Vec<_>>().len(), 3);
    assert!(residuals_csv(&[]).starts_with("iteration,relativeResidual"));
}

fn efie() -> Command {
    Command::new(env!("CARGO_BIN_EXE_efie"))
}

#[test]
fn cli_cost() {
    let out = efie()
        .args(["cost", "--tpc", "0", "--nitr", "1", "--nrhs", "1", "--tpcsol", "0", "--tmmv", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "1.0");
}

#[test]
fn cli_rejects_bad_arguments() {
    assert!(!efie().args(["cost", "--tpc", "1"]).output().unwrap().status.success());
    assert!(!efie().args(["mesh-info", "--geometry", "cube"]).output().unwrap().status.success());
}

#[test]
fn cli_mesh_info_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = efie()
        .args(["mesh-info", "--geometry", "icosahedron", "--output-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let info: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(info["rwg_bases"], 30);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["command"], "mesh-info");
}

#[test]
fn cli_small_sphere_solve() {
    let dir = tempfile::tempdir().unwrap();
    let out = efie()
        .args(["solve", "--geometry", "sphere", "--radius-wavelengths", "0.3", "--output-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["converged"], true);
    let residuals = std::fs::read_to_string(dir.path().join("residuals.csv")).unwrap();
    assert!(residuals.lines().count() > 1);
}
