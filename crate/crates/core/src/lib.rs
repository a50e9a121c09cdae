//! EFIE method-of-moments solver for PEC surfaces.
//!
//! The pipeline: mesh a surface and build its RWG basis ([`mesh`]), evaluate
//! EFIE matrix entries ([`efie`]), compress the system matrix into an
//! H-matrix ([`hmatrix`]), build and factor a sparse tridiagonal or
//! block-tridiagonal preconditioner ([`precond`], [`sparse`]), solve with
//! GMRES ([`krylov`]) and evaluate the scattered far field ([`postproc`]).
//! [`harness`] holds the command-line driver, benchmark sweeps and the
//! total-time cost model.

pub mod efie;
pub mod geometry;
pub mod harness;
pub mod hmatrix;
pub mod krylov;
pub mod mesh;
pub mod postproc;
pub mod precond;
pub mod quadrature;
pub mod sparse;
