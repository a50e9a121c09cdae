//! Krylov solution of the H-matrix system and spectral diagnostics.

mod gmres;
mod spectrum;

use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::efie::{excitation, EfieKernel, PhysicsParams, PlaneWave, QuadratureConfig};
use crate::hmatrix::{ClusterTree, CompressionReport, HMatrix, HMatrixConfig, HMatrixError};
use crate::precond::{PrecondConfig, PrecondError, PrecondVariant, Preconditioner};

pub use gmres::{gmres, GmresConfig, GmresReport, PrecondSide};
pub use spectrum::{dense_spectrum, normalize_by_mean_diagonal, SpectrumReport, DEFAULT_DENSE_CAP};

#[derive(Debug, Error)]
pub enum KrylovError {
    #[error("vector length {got} does not match operator size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dense eigen-decomposition of size {n} exceeds the cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("preconditioner failed: {0}")]
    Preconditioner(String),
    #[error("LAPACK failure: {0}")]
    Lapack(String),
    #[error(transparent)]
    HMatrix(#[from] HMatrixError),
    #[error(transparent)]
    Precond(#[from] PrecondError),
}

/// One GMRES solve of an iteration experiment.
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub label: String,
    pub iterations: usize,
    pub converged: bool,
    pub breakdown: bool,
    pub true_residual: f64,
    pub solve_seconds: f64,
    pub precond_nnz: Option<usize>,
    pub fill_nnz: Option<usize>,
    pub precond_build_seconds: Option<f64>,
    pub precond_factor_seconds: Option<f64>,
    pub residual_history: Vec<f64>,
    #[serde(skip)]
    pub solution: Vec<Complex64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationExperiment {
    pub n: usize,
    pub gmres: GmresConfig,
    pub kernel_seconds: f64,
    pub hmatrix_seconds: f64,
    pub compression: CompressionReport,
    pub unpreconditioned: SolveSummary,
    pub tri: SolveSummary,
    pub block_tri: SolveSummary,
}

impl IterationExperiment {
    /// `(unpreconditioned, tri, block_tri)` iteration counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.unpreconditioned.iterations, self.tri.iterations, self.block_tri.iterations)
    }
}

/// Solves the scattering problem on `tree.mesh()` three times with the same
/// excitation and tolerance: without preconditioner, with the tridiagonal
/// and with the block-tridiagonal preconditioner.
pub fn iteration_experiment(
    tree: &ClusterTree,
    physics: PhysicsParams,
    wave: &PlaneWave,
    quad: QuadratureConfig,
    hconfig: &HMatrixConfig,
    gconfig: &GmresConfig,
) -> Result<IterationExperiment, KrylovError> {
    let mesh = tree.mesh();
    let start = Instant::now();
    let kernel = EfieKernel::with_quadrature(mesh, physics, quad);
    let kernel_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let h = HMatrix::build(tree, &kernel, hconfig)?;
    let hmatrix_seconds = start.elapsed().as_secs_f64();
    let b = excitation(mesh, &physics, wave);
    let matvec = |x: &[Complex64]| h.matvec(x).expect("length checked by GMRES");

    let run = |label: &str, pc: Option<&Preconditioner>| -> Result<SolveSummary, KrylovError> {
        let apply = |x: &[Complex64]| pc.unwrap().apply(x).expect("length checked by GMRES");
        let precond: Option<&dyn Fn(&[Complex64]) -> Vec<Complex64>> = if pc.is_some() { Some(&apply) } else { None };
        let start = Instant::now();
        let r = gmres(&matvec, precond, &b, gconfig)?;
        Ok(SolveSummary {
            label: label.to_string(),
            iterations: r.iterations,
            converged: r.converged,
            breakdown: r.breakdown,
            true_residual: r.true_residual,
            solve_seconds: start.elapsed().as_secs_f64(),
            precond_nnz: pc.map(|p| p.matrix.nnz()),
            fill_nnz: pc.map(|p| p.lu.fill_nnz()),
            precond_build_seconds: pc.map(|p| p.build_seconds),
            precond_factor_seconds: pc.map(|p| p.factor_seconds),
            residual_history: r.residual_history,
            solution: r.solution,
        })
    };
    let unpreconditioned = run("unpreconditioned", None)?;
    let tri_pc = Preconditioner::build(tree, &kernel, &PrecondConfig::new(PrecondVariant::TriTridiagonal))?;
    let tri = run("tri-tridiagonal", Some(&tri_pc))?;
    drop(tri_pc);
    let block_pc = Preconditioner::build(tree, &kernel, &PrecondConfig::new(PrecondVariant::BlockTridiagonal))?;
    let block_tri = run("block-tridiagonal", Some(&block_pc))?;
    Ok(IterationExperiment {
        n: mesh.num_bases(),
        gmres: *gconfig,
        kernel_seconds,
        hmatrix_seconds,
        compression: h.report(),
        unpreconditioned,
        tri,
        block_tri,
    })
}
