//! Run configuration, manifests, benchmark sweeps and the solve-time model.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::efie::{EfieKernel, PhysicsParams, SPEED_OF_LIGHT};
use crate::hmatrix::{build_tree, HMatrixError, DEFAULT_LEAF_SIZE};
use crate::mesh::{load_mesh, mesh_icosphere, MeshFormat, mesh_plate, sphere_frequency, MeshError, SurfaceMesh};
use crate::precond::{PrecondConfig, PrecondError, PrecondVariant, Preconditioner};

/// Environment variable read by the command-line tool to cap worker threads.
pub const THREADS_ENV: &str = "EFIE_THREADS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    HMatrix(#[from] HMatrixError),
    #[error(transparent)]
    Precond(#[from] PrecondError),
    #[error("sweep aborted at size {size}: {message}")]
    SweepAborted { size: f64, message: String, partial: Vec<BenchRecord> },
}

/// Inputs of the total-solve-time model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModelInput {
    /// Preconditioner construction time, seconds.
    pub tpc: f64,
    /// Iterations per right-hand side.
    pub nitr: f64,
    /// Number of right-hand sides.
    pub nrhs: f64,
    /// Preconditioner solve time per iteration, seconds.
    pub tpcsol: f64,
    /// Matrix-vector product time, seconds.
    pub tmmv: f64,
}

/// `T_total = T_pc + N_itr · N_rhs · (T_pcsol + T_mmv)`.
pub fn cost_model(input: &CostModelInput) -> f64 {
    input.tpc + input.nitr * input.nrhs * (input.tpcsol + input.tmmv)
}

/// Ratio of two modelled totals, `baseline / candidate`.
pub fn speedup(baseline: &CostModelInput, candidate: &CostModelInput) -> f64 {
    cost_model(baseline) / cost_model(candidate)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 { None } else { Some(sxy / sxx) }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Geometry {
    /// Square plate with the given side in wavelengths.
    Plate { side_wavelengths: f64 },
    /// Sphere with the given radius in wavelengths. Without `subdivisions`
    /// the icosphere frequency follows from the edge length; `Some(1)` is
    /// the icosahedron.
    Sphere {
        radius_wavelengths: f64,
        #[serde(default)]
        subdivisions: Option<usize>,
    },
    /// Mesh file (Gmsh 2 ASCII or raw triangles).
    File { path: PathBuf },
}

/// Full description of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub frequency: f64,
    /// Target edge length in wavelengths.
    pub edge_wavelengths: f64,
    pub eta: f64,
    pub leaf_size: usize,
    pub compression_tol: f64,
    pub precond: Option<PrecondConfig>,
    pub gmres: crate::krylov::GmresConfig,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn new(geometry: Geometry) -> Self {
        RunConfig {
            geometry,
            frequency: SPEED_OF_LIGHT,
            edge_wavelengths: 0.1,
            eta: 1.0,
            leaf_size: DEFAULT_LEAF_SIZE,
            compression_tol: 1e-3,
            precond: Some(PrecondConfig::new(PrecondVariant::BlockTridiagonal)),
            gmres: Default::default(),
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let positive = [
            ("frequency", self.frequency),
            ("edge length", self.edge_wavelengths),
            ("compression tolerance", self.compression_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HarnessError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.eta < 0.0 {
            return Err(HarnessError::Config(format!("eta must be non-negative, got {}", self.eta)));
        }
        if self.leaf_size == 0 {
            return Err(HarnessError::Config("leaf size must be at least 1".into()));
        }
        match &self.geometry {
            Geometry::Plate { side_wavelengths: s } | Geometry::Sphere { radius_wavelengths: s, .. } if !(*s > 0.0) => {
                Err(HarnessError::Config(format!("geometry size must be positive, got {s}")))
            }
            Geometry::File { path } if !path.exists() => {
                Err(HarnessError::Config(format!("mesh file {} does not exist", path.display())))
            }
            _ => Ok(()),
        }
    }

    pub fn physics(&self) -> PhysicsParams {
        PhysicsParams::new(self.frequency)
    }

    pub fn mesh(&self) -> Result<SurfaceMesh, HarnessError> {
        self.validate()?;
        let lambda = SPEED_OF_LIGHT / self.frequency;
        let h = self.edge_wavelengths * lambda;
        Ok(match &self.geometry {
            Geometry::Plate { side_wavelengths } => mesh_plate(side_wavelengths * lambda, side_wavelengths * lambda, h)?,
            Geometry::Sphere { radius_wavelengths, subdivisions } => {
                let r = radius_wavelengths * lambda;
                mesh_icosphere(r, subdivisions.unwrap_or_else(|| sphere_frequency(r, h)))?
            }
            Geometry::File { path } => {
                let format = MeshFormat::from_path(path).ok_or_else(|| {
                    HarnessError::Config(format!("cannot tell the mesh format of {}; use .msh or .tri", path.display()))
                })?;
                load_mesh(path, format)?
            }
        })
    }
}

/// Machine-readable record of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: T,
    /// Seed of any random stage; every other stage is deterministic.
    pub seed: u64,
    pub threads: usize,
    pub timings: Vec<(String, f64)>,
    pub results: serde_json::Value,
}

impl<T: Serialize> Manifest<T> {
    pub fn new(command: &str, config: T) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            seed: 0,
            threads: rayon::current_num_threads(),
            timings: Vec::new(),
            results: serde_json::Value::Null,
        }
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })?;
        }
    }
    fs::write(path, contents).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_file(path, &(text + "\n"))
}

/// `iteration,relativeResidual` lines under a header.
pub fn residuals_csv(history: &[f64]) -> String {
    let mut s = String::from("iteration,relativeResidual\n");
    for (i, r) in history.iter().enumerate() {
        s.push_str(&format!("{},{:.12e}\n", i + 1, r));
    }
    s
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchRecord {
    pub n: usize,
    pub build_seconds: f64,
    pub factor_seconds: f64,
    pub apply_seconds: f64,
    pub nnz_before: usize,
    pub nnz_after: usize,
    pub peak_estimate_bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchSweep {
    pub variant: PrecondVariant,
    pub records: Vec<BenchRecord>,
    pub nnz_slope: Option<f64>,
    pub fill_slope: Option<f64>,
    pub build_slope: Option<f64>,
    pub factor_slope: Option<f64>,
    pub apply_slope: Option<f64>,
}

impl BenchSweep {
    pub fn from_records(variant: PrecondVariant, records: Vec<BenchRecord>) -> Self {
        let n: Vec<f64> = records.iter().map(|r| r.n as f64).collect();
        let col = |f: fn(&BenchRecord) -> f64| -> Vec<f64> { records.iter().map(f).collect() };
        BenchSweep {
            variant,
            nnz_slope: loglog_slope(&n, &col(|r| r.nnz_before as f64)),
            fill_slope: loglog_slope(&n, &col(|r| r.nnz_after as f64)),
            build_slope: loglog_slope(&n, &col(|r| r.build_seconds)),
            factor_slope: loglog_slope(&n, &col(|r| r.factor_seconds)),
            apply_slope: loglog_slope(&n, &col(|r| r.apply_seconds)),
            records,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,buildSeconds,factorSeconds,applySeconds,nnzBefore,nnzAfter,peakEstimateBytes\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{:.6e},{:.6e},{:.6e},{},{},{}\n",
                r.n, r.build_seconds, r.factor_seconds, r.apply_seconds, r.nnz_before, r.nnz_after, r.peak_estimate_bytes
            ));
        }
        s
    }
}

/// Builds, factors and applies the preconditioner on square plates of the
/// given sides (wavelengths, `λ/10` edges). Every timing is the minimum over
/// `repeats` runs.
pub fn bench_sweep(sides: &[f64], variant: PrecondVariant, repeats: usize) -> Result<BenchSweep, HarnessError> {
    if sides.len() < 4 {
        return Err(HarnessError::Config(format!("a sweep needs at least 4 sizes, got {}", sides.len())));
    }
    if sides.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::Config("sweep sizes must increase".into()));
    }
    let repeats = repeats.max(1);
    let physics = PhysicsParams::new(SPEED_OF_LIGHT);
    let mut records = Vec::new();
    for &side in sides {
        let record = (|| -> Result<BenchRecord, HarnessError> {
            let mesh = mesh_plate(side, side, 0.1)?;
            let tree = build_tree(&mesh, DEFAULT_LEAF_SIZE)?;
            let kernel = EfieKernel::new(tree.mesh(), physics);
            let config = PrecondConfig::new(variant);
            let (mut build, mut factor, mut apply) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
            let mut last = None;
            for _ in 0..repeats {
                let pc = Preconditioner::build(&tree, &kernel, &config)?;
                build = build.min(pc.build_seconds);
                factor = factor.min(pc.factor_seconds);
                let b: Vec<Complex64> = (0..pc.matrix.size()).map(|i| Complex64::new(1.0, (i % 7) as f64)).collect();
                // batches of at least 10 ms keep timer resolution out of small sizes
                let start = Instant::now();
                let mut calls = 0u32;
                while calls < 3 || start.elapsed().as_secs_f64() < 0.01 {
                    std::hint::black_box(pc.apply(&b).expect("sizes agree"));
                    calls += 1;
                }
                apply = apply.min(start.elapsed().as_secs_f64() / calls as f64);
                last = Some(pc);
            }
            let pc = last.expect("at least one repeat");
            let before = pc.matrix.memory_report();
            let after = pc.lu.memory_report();
            Ok(BenchRecord {
                n: pc.matrix.size(),
                build_seconds: build,
                factor_seconds: factor,
                apply_seconds: apply,
                nnz_before: before.nnz,
                nnz_after: after.nnz,
                peak_estimate_bytes: before.bytes + after.bytes,
            })
        })();
        match record {
            Ok(r) => records.push(r),
            Err(e) => return Err(HarnessError::SweepAborted { size: side, message: e.to_string(), partial: records }),
        }
    }
    Ok(BenchSweep::from_records(variant, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 1.5).abs() < 1e-12);
        assert!(loglog_slope(&x, &[1.0; 4]).unwrap().abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn config_validation_names_the_field() {
        let mut c = RunConfig::new(Geometry::Plate { side_wavelengths: 1.0 });
        c.compression_tol = 0.0;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("compression tolerance"));
    }
}
