//! `efie` command-line tool.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use efie_core::efie::{excitation, EfieKernel, PlaneWave, Polarization};
use efie_core::harness::{
    bench_sweep, cost_model, residuals_csv, write_file, write_json, CostModelInput, Geometry, HarnessError, Manifest,
    RunConfig, THREADS_ENV,
};
use efie_core::hmatrix::{build_tree, HMatrix, HMatrixConfig};
use efie_core::krylov::{dense_spectrum, gmres, normalize_by_mean_diagonal, GmresConfig, PrecondSide, DEFAULT_DENSE_CAP};
use efie_core::postproc::{angle_sweep, mie_rcs, rcs_compare, scattered_farfield, MieConfig};
use efie_core::precond::{EntryMode, PrecondConfig, PrecondVariant, Preconditioner};
use efie_core::sparse::FillOrdering;

type AnyError = Box<dyn std::error::Error>;

#[derive(Parser)]
#[command(name = "efie", version, about = "EFIE scattering solver with H-matrix compression and sparse preconditioners")]
struct Cli {
    /// Worker thread cap; overrides the EFIE_THREADS environment variable.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mesh statistics and RWG basis count.
    MeshInfo(ProblemArgs),
    /// Build the H-matrix and the preconditioner; report compression and sparsity.
    Assemble(ProblemArgs),
    /// Solve for the surface current of a plane-wave excitation.
    Solve(ProblemArgs),
    /// Solve, then compute the bistatic RCS (and the Mie series for spheres).
    Rcs(RcsArgs),
    /// Dense eigenvalues of the normalized system matrix or of P⁻¹Z.
    Eigs(EigsArgs),
    /// Preconditioner build, factor and apply timings over a plate sweep.
    Bench(BenchArgs),
    /// Evaluate the total solve time model.
    Cost(CostArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryKind {
    Plate,
    Sphere,
    Icosahedron,
    File,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PrecondChoice {
    None,
    TriTridiagonal,
    BlockTridiagonal,
}

impl PrecondChoice {
    fn variant(self) -> Option<PrecondVariant> {
        match self {
            PrecondChoice::None => None,
            PrecondChoice::TriTridiagonal => Some(PrecondVariant::TriTridiagonal),
            PrecondChoice::BlockTridiagonal => Some(PrecondVariant::BlockTridiagonal),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EntryChoice {
    PartialPair,
    FullEntry,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderingChoice {
    Natural,
    Amd,
    NestedDissection,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideChoice {
    Left,
    Right,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolChoice {
    Vv,
    Hh,
}

impl PolChoice {
    fn polarization(self) -> Polarization {
        match self {
            PolChoice::Vv => Polarization::VV,
            PolChoice::Hh => Polarization::HH,
        }
    }
}

#[derive(Args, Clone)]
struct ProblemArgs {
    #[arg(long, value_enum, default_value = "sphere")]
    geometry: GeometryKind,
    /// Plate side, wavelengths.
    #[arg(long, default_value_t = 1.0)]
    side_wavelengths: f64,
    /// Sphere radius, wavelengths.
    #[arg(long, default_value_t = 1.0)]
    radius_wavelengths: f64,
    /// Icosphere subdivision frequency; derived from the edge length when absent.
    #[arg(long)]
    subdivisions: Option<usize>,
    /// Mesh file (.msh Gmsh 2 ASCII or .tri raw triangles) for `--geometry file`.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Frequency in Hz; the default gives a 1 m wavelength.
    #[arg(long, default_value_t = efie_core::efie::SPEED_OF_LIGHT)]
    frequency: f64,
    /// Target edge length, wavelengths.
    #[arg(long, default_value_t = 0.1)]
    edge_wavelengths: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 30)]
    leaf_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    compression_tol: f64,
    #[arg(long, value_enum, default_value = "block-tridiagonal")]
    precond: PrecondChoice,
    #[arg(long, value_enum, default_value = "partial-pair")]
    entry_mode: EntryChoice,
    /// Fill-reducing order; nested dissection for the tridiagonal variant and
    /// AMD for the block variant when absent.
    #[arg(long, value_enum)]
    fill_ordering: Option<OrderingChoice>,
    #[arg(long, default_value_t = 0.1)]
    pivot_threshold: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    restart: usize,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, value_enum, default_value = "left")]
    side: SideChoice,
    /// Incidence direction θ, degrees.
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// Incidence direction φ, degrees.
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    #[arg(long, value_enum, default_value = "vv")]
    polarization: PolChoice,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
}

impl ProblemArgs {
    fn run_config(&self) -> Result<RunConfig, HarnessError> {
        let geometry = match self.geometry {
            GeometryKind::Plate => Geometry::Plate { side_wavelengths: self.side_wavelengths },
            GeometryKind::Sphere => {
                Geometry::Sphere { radius_wavelengths: self.radius_wavelengths, subdivisions: self.subdivisions }
            }
            GeometryKind::Icosahedron => Geometry::Sphere { radius_wavelengths: self.radius_wavelengths, subdivisions: Some(1) },
            GeometryKind::File => Geometry::File {
                path: self.mesh.clone().ok_or_else(|| HarnessError::Config("--geometry file needs --mesh <path>".into()))?,
            },
        };
        let precond = self.precond.variant().map(|v| {
            let mut c = PrecondConfig::new(v).with_entry_mode(match self.entry_mode {
                EntryChoice::PartialPair => EntryMode::PartialPair,
                EntryChoice::FullEntry => EntryMode::FullEntry,
            });
            c.pivot_threshold = self.pivot_threshold;
            if let Some(choice) = self.fill_ordering {
                c.fill_ordering = match choice {
                    OrderingChoice::Natural => FillOrdering::Natural,
                    OrderingChoice::Amd => FillOrdering::Amd,
                    OrderingChoice::NestedDissection => FillOrdering::NestedDissection,
                };
            }
            c
        });
        let config = RunConfig {
            geometry,
            frequency: self.frequency,
            edge_wavelengths: self.edge_wavelengths,
            eta: self.eta,
            leaf_size: self.leaf_size,
            compression_tol: self.compression_tol,
            precond,
            gmres: GmresConfig {
                tol: self.tol,
                restart: self.restart,
                max_iters: self.max_iters,
                side: match self.side {
                    SideChoice::Left => PrecondSide::Left,
                    SideChoice::Right => PrecondSide::Right,
                },
            },
            output_dir: self.output_dir.clone(),
        };
        config.validate()?;
        if !(self.tol > 0.0) || self.restart == 0 || self.max_iters == 0 {
            return Err(HarnessError::Config("--tol, --restart and --max-iters must be positive".into()));
        }
        Ok(config)
    }

    fn wave(&self) -> PlaneWave {
        PlaneWave::new(self.theta.to_radians(), self.phi.to_radians(), self.polarization.polarization())
    }
}

#[derive(Args)]
struct RcsArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Observation cut φ, degrees.
    #[arg(long, default_value_t = 0.0)]
    cut_phi: f64,
    /// Number of θ samples from 0° to 180°.
    #[arg(long, default_value_t = 181)]
    samples: usize,
    /// Null guard of the Mie comparison, dB.
    #[arg(long, default_value_t = 3.0)]
    null_guard: f64,
}

#[derive(Args)]
struct EigsArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Largest N for the dense eigen-decomposition.
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    cap: usize,
    /// Radius of the cluster around 1 that is reported.
    #[arg(long, default_value_t = 0.5)]
    radius: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// Plate sides in wavelengths, increasing, at least four.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 3.0, 4.0])]
    sides: Vec<f64>,
    #[arg(long, value_enum, default_value = "tri-tridiagonal")]
    variant: PrecondChoice,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
}

#[derive(Args, Serialize)]
struct CostArgs {
    #[arg(long)]
    tpc: f64,
    #[arg(long)]
    nitr: f64,
    #[arg(long)]
    nrhs: f64,
    #[arg(long)]
    tpcsol: f64,
    #[arg(long)]
    tmmv: f64,
}

fn init_threads(flag: Option<usize>) -> Result<(), AnyError> {
    let from_env = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| format!("{THREADS_ENV}={v} is not a thread count"))?),
        Err(_) => None,
    };
    if let Some(n) = flag.or(from_env) {
        if n == 0 {
            return Err("thread count must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Mesh, cluster tree, kernel and H-matrix shared by the solving commands.
struct Problem {
    config: RunConfig,
    tree: efie_core::hmatrix::ClusterTree,
    timings: Vec<(String, f64)>,
}

impl Problem {
    fn new(args: &ProblemArgs) -> Result<Problem, AnyError> {
        let config = args.run_config()?;
        let start = Instant::now();
        let mesh = config.mesh()?;
        let tree = build_tree(&mesh, config.leaf_size)?;
        Ok(Problem { config, tree, timings: vec![("mesh".into(), start.elapsed().as_secs_f64())] })
    }

    fn hconfig(&self) -> HMatrixConfig {
        HMatrixConfig { eta: self.config.eta, tol: self.config.compression_tol, leaf_size: self.config.leaf_size }
    }

    fn time<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push((label.into(), start.elapsed().as_secs_f64()));
        out
    }
}

#[derive(Serialize)]
struct SolveOutput {
    n: usize,
    report: efie_core::krylov::GmresReport,
    compression: efie_core::hmatrix::CompressionReport,
    precond_nnz: Option<usize>,
    fill_nnz: Option<usize>,
}

fn solve(problem: &mut Problem, wave: &PlaneWave) -> Result<(SolveOutput, Vec<Complex64>), AnyError> {
    let physics = problem.config.physics();
    let hconfig = problem.hconfig();
    let tree = problem.tree.clone();
    let kernel = EfieKernel::new(tree.mesh(), physics);
    let h = problem.time("hmatrix", || HMatrix::build(&tree, &kernel, &hconfig))?;
    let pc = match problem.config.precond {
        Some(c) => Some(problem.time("precond", || Preconditioner::build(&tree, &kernel, &c))?),
        None => None,
    };
    let b = excitation(tree.mesh(), &physics, wave);
    let matvec = |x: &[Complex64]| h.matvec(x).expect("length checked by GMRES");
    let apply = |x: &[Complex64]| pc.as_ref().expect("present").apply(x).expect("length checked by GMRES");
    let precond: Option<&dyn Fn(&[Complex64]) -> Vec<Complex64>> = if pc.is_some() { Some(&apply) } else { None };
    let gconfig = problem.config.gmres;
    let report = problem.time("gmres", || gmres(&matvec, precond, &b, &gconfig))?;
    let solution = report.solution.clone();
    let out = SolveOutput {
        n: tree.mesh().num_bases(),
        compression: h.report(),
        precond_nnz: pc.as_ref().map(|p| p.matrix.nnz()),
        fill_nnz: pc.as_ref().map(|p| p.lu.fill_nnz()),
        report,
    };
    Ok((out, solution))
}

fn finish<T: Serialize>(dir: &Path, command: &str, config: T, timings: Vec<(String, f64)>, results: &impl Serialize) -> Result<(), AnyError> {
    let mut manifest = Manifest::new(command, config);
    manifest.timings = timings;
    manifest.results = serde_json::to_value(results)?;
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), AnyError> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::MeshInfo(args) => {
            let config = args.run_config()?;
            let stats = config.mesh()?.stats();
            println!("{}", serde_json::to_string_pretty(&stats)?);
            finish(&config.output_dir, "mesh-info", &config, Vec::new(), &stats)?;
        }
        Command::Assemble(args) => {
            let mut problem = Problem::new(&args)?;
            let physics = problem.config.physics();
            let hconfig = problem.hconfig();
            let tree = problem.tree.clone();
            let kernel = EfieKernel::new(tree.mesh(), physics);
            let h = problem.time("hmatrix", || HMatrix::build(&tree, &kernel, &hconfig))?;
            let compression = h.report();
            let mut results = serde_json::json!({ "n": h.size(), "compression": compression });
            if let Some(c) = problem.config.precond {
                let pc = problem.time("precond", || Preconditioner::build(&tree, &kernel, &c))?;
                write_file(&problem.config.output_dir.join("pattern.csv"), &pc.matrix.pattern_csv())?;
                results["precond"] = serde_json::json!({
                    "variant": c.variant,
                    "nnz": pc.matrix.nnz(),
                    "fill_nnz": pc.lu.fill_nnz(),
                    "build_seconds": pc.build_seconds,
                    "factor_seconds": pc.factor_seconds,
                });
            }
            println!("{}", serde_json::to_string_pretty(&results)?);
            finish(&problem.config.output_dir, "assemble", &problem.config, problem.timings, &results)?;
        }
        Command::Solve(args) => {
            let mut problem = Problem::new(&args)?;
            let (out, _) = solve(&mut problem, &args.wave())?;
            let dir = problem.config.output_dir.clone();
            write_file(&dir.join("residuals.csv"), &residuals_csv(&out.report.residual_history))?;
            println!("{}", serde_json::to_string_pretty(&out.report)?);
            finish(&dir, "solve", &problem.config, problem.timings, &out)?;
            if !out.report.converged {
                return Err(format!("GMRES did not converge in {} iterations", out.report.iterations).into());
            }
        }
        Command::Rcs(args) => {
            let wave = args.problem.wave();
            let mut problem = Problem::new(&args.problem)?;
            let (out, x) = solve(&mut problem, &wave)?;
            let cut = args.cut_phi.to_radians();
            let angles: Vec<(f64, f64)> = angle_sweep(0.0, std::f64::consts::PI, args.samples).into_iter().map(|t| (t, cut)).collect();
            let physics = problem.config.physics();
            let mesh = problem.tree.mesh();
            let rcs = scattered_farfield(mesh, &physics, &x, &angles, wave.polarization, wave.amplitude)?;
            let dir = problem.config.output_dir.clone();
            write_file(&dir.join("rcs.csv"), &rcs.to_csv())?;
            write_file(&dir.join("residuals.csv"), &residuals_csv(&out.report.residual_history))?;
            let mut results = serde_json::json!({ "solve": out });
            if let Geometry::Sphere { radius_wavelengths, .. } = problem.config.geometry {
                if wave.theta == 0.0 {
                    let mie = MieConfig::new(radius_wavelengths * physics.wavelength(), physics.frequency);
                    let reference = mie_rcs(&mie, &angles, wave.polarization)?;
                    write_file(&dir.join("rcs_mie.csv"), &reference.to_csv())?;
                    let cmp = rcs_compare(&rcs, &reference, args.null_guard)?;
                    println!("rms error vs Mie series: {:.3} dB (max {:.3} dB over {} of {} samples)", cmp.rms_db, cmp.max_db, cmp.samples_used, cmp.samples_total);
                    results["mie_comparison"] = serde_json::to_value(cmp)?;
                }
            }
            finish(&dir, "rcs", &problem.config, problem.timings, &results)?;
        }
        Command::Eigs(args) => {
            let mut problem = Problem::new(&args.problem)?;
            let n = problem.tree.mesh().num_bases();
            if n > args.cap {
                return Err(format!("N = {n} exceeds the dense cap {}; use a coarser mesh or raise --cap", args.cap).into());
            }
            let tree = problem.tree.clone();
            let kernel = EfieKernel::new(tree.mesh(), problem.config.physics());
            let z = problem.time("dense", || kernel.dense_matrix());
            let spectrum = match problem.config.precond {
                None => problem.time("eig", || dense_spectrum(&normalize_by_mean_diagonal(&z), None, args.cap))?,
                Some(c) => {
                    let pc = problem.time("precond", || Preconditioner::build(&tree, &kernel, &c))?;
                    problem.time("eig", || dense_spectrum(&z, Some(&pc.lu), args.cap))?
                }
            };
            let dir = problem.config.output_dir.clone();
            write_file(&dir.join("spectrum.csv"), &spectrum.to_csv())?;
            let results = serde_json::json!({
                "n": n,
                "cluster_radius": args.radius,
                "cluster_fraction": spectrum.cluster_fraction(args.radius),
                "condition_estimate": spectrum.condition_estimate(),
            });
            println!("{}", serde_json::to_string_pretty(&results)?);
            finish(&dir, "eigs", &problem.config, problem.timings, &results)?;
        }
        Command::Bench(args) => {
            let variant = args.variant.variant().ok_or("bench needs a preconditioner variant")?;
            let start = Instant::now();
            let sweep = match bench_sweep(&args.sides, variant, args.repeats) {
                Ok(s) => s,
                Err(HarnessError::SweepAborted { size, message, partial }) => {
                    let partial = efie_core::harness::BenchSweep::from_records(variant, partial);
                    write_file(&args.output_dir.join("bench.csv"), &partial.to_csv())?;
                    return Err(format!("sweep aborted at side {size}: {message}; partial results in bench.csv").into());
                }
                Err(e) => return Err(e.into()),
            };
            write_file(&args.output_dir.join("bench.csv"), &sweep.to_csv())?;
            print!("{}", sweep.to_csv());
            println!(
                "slopes: nnz {:?} fill {:?} build {:?} factor {:?} apply {:?}",
                sweep.nnz_slope, sweep.fill_slope, sweep.build_slope, sweep.factor_slope, sweep.apply_slope
            );
            let config = serde_json::json!({ "sides": args.sides, "variant": variant, "repeats": args.repeats });
            finish(&args.output_dir, "bench", config, vec![("sweep".into(), start.elapsed().as_secs_f64())], &sweep)?;
        }
        Command::Cost(args) => {
            let input = CostModelInput { tpc: args.tpc, nitr: args.nitr, nrhs: args.nrhs, tpcsol: args.tpcsol, tmmv: args.tmmv };
            if [input.tpc, input.nitr, input.nrhs, input.tpcsol, input.tmmv].iter().any(|v| !(*v >= 0.0)) {
                return Err("cost model inputs must be non-negative".into());
            }
            println!("{:?}", cost_model(&input));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
