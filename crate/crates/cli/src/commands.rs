//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use tomosar::io::{read_tsr3, write_cloud_csv, write_json, write_tsr3};
use tomosar::metrics::{evaluate, extract_point_cloud, timed, DEFAULT_REL_THRESHOLD, DEFAULT_TAU_P};
use tomosar::sim::TestObject;
use tomosar::solvers::{
    ista_fiber, lista_infer, lista_init, lista_train, normalized_mse, ConfigOverrides, FiberDataset, LearnedIstaParams,
    SolverConfig, SolverReport, Variant,
};
use tomosar::{ComplexTensor3, Error, SteeringMatrix, SystemGeometry};

use crate::error::{exit, CliError, CliResult};
use crate::method::{reconstruct, Method};
use crate::resolution::{default_separations, run_resolution_study, ResolutionParams, PEAK_THRESHOLD, SUCCESS_RADIUS};
use crate::scene::{object_params, simulate_scene};
use crate::structure::{run_structure_test, write_bundle, StructureParams};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "TOMOSAR_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "tomosar",
    version,
    about = "Tomographic SAR simulation, reconstruction and evaluation"
)]
pub struct Cli {
    /// Write wall-clock fields as 0 so that repeated runs give identical files.
    #[arg(long, global = true)]
    pub omit_timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a test object and its noisy echo.
    Simulate(SimulateArgs),
    /// Reconstruct a scene from an echo.
    Reconstruct(ReconstructArgs),
    /// Compare a reconstruction with the ground truth.
    Evaluate(EvaluateArgs),
    /// Two-scatterer Monte Carlo resolution curve.
    ResolutionTest(ResolutionArgs),
    /// Simulate, reconstruct and evaluate one structured object.
    StructureTest(StructureArgs),
    /// Fit learned-ISTA step sizes and thresholds on synthetic fibers.
    TrainLista(TrainArgs),
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    /// System geometry JSON. Defaults to the reference geometry.
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    /// Elevation cells of the reference geometry.
    #[arg(long, default_value_t = 64, conflicts_with = "geometry")]
    pub nz: usize,
}

impl GeometryArgs {
    pub fn load(&self) -> CliResult<SystemGeometry> {
        match &self.geometry {
            Some(path) => read_text(path)
                .and_then(|t| SystemGeometry::from_json(&t))
                .map_err(|e| CliError::config_input("geometry", path, e)),
            None => Ok(SystemGeometry::reference(self.nz)?),
        }
    }
}

/// Solver settings. Flags override the JSON file, which overrides the
/// data-derived defaults.
#[derive(Debug, Args, Default)]
pub struct SolverArgs {
    /// Solver configuration JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda1_scale: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub lambda2_ratio: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub tau1: Option<f64>,
    #[arg(long)]
    pub tau2: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub inner_iters: Option<usize>,
    #[arg(long)]
    pub enhance_iters: Option<usize>,
    /// Learned-ISTA parameter JSON, required by `--method lista`.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

impl SolverArgs {
    pub fn overrides(&self) -> CliResult<ConfigOverrides> {
        let base = match &self.config {
            Some(path) => read_text(path)
                .and_then(|t| Ok(serde_json::from_str::<ConfigOverrides>(&t)?))
                .map_err(|e| CliError::config_input("solver config", path, e))?,
            None => ConfigOverrides::default(),
        };
        let flags = ConfigOverrides {
            alpha: self.alpha,
            lambda1: self.lambda1,
            lambda1_scale: self.lambda1_scale,
            lambda2: self.lambda2,
            lambda2_ratio: self.lambda2_ratio,
            mu: self.mu,
            tau1: self.tau1,
            tau2: self.tau2,
            sigma: self.sigma,
            max_outer: self.max_outer,
            inner_iters: self.inner_iters,
            enhance_iters: self.enhance_iters,
        };
        Ok(base.merged_with(&flags))
    }

    pub fn lista_params(&self, method: Method) -> CliResult<Option<LearnedIstaParams>> {
        match (&self.params, method) {
            (Some(path), _) => read_text(path)
                .and_then(|t| LearnedIstaParams::from_json(&t))
                .map(Some)
                .map_err(|e| CliError::config_input("learned-ISTA parameters", path, e)),
            (None, Method::Lista) => Err(CliError::usage("--method lista needs --params")),
            (None, _) => Ok(None),
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// one_step, multi_step, building:<kind> or two_scatterers:<separation>.
    #[arg(long, value_parser = parse_object)]
    pub model: TestObject,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// SNR in dB; `inf` for a noiseless echo.
    #[arg(long, default_value = "5", value_parser = parse_snr)]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub nx: usize,
    #[arg(long, default_value_t = 64)]
    pub ny: usize,
    #[arg(long)]
    pub out_scene: PathBuf,
    #[arg(long)]
    pub out_echo: PathBuf,
    #[arg(long)]
    pub out_meta: Option<PathBuf>,
    /// Ground-truth point cloud CSV.
    #[arg(long)]
    pub out_cloud: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub echo: PathBuf,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Solver report JSON with the resolved configuration.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub recon: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TAU_P)]
    pub tau_p: f64,
    #[arg(long, default_value_t = DEFAULT_REL_THRESHOLD)]
    pub rel_threshold: f64,
    /// Report written by `reconstruct`, for the reconstruction time.
    #[arg(long)]
    pub solver_report: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Reconstructed point cloud CSV.
    #[arg(long)]
    pub out_cloud: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ResolutionArgs {
    #[arg(long, value_enum, default_value = "fista")]
    pub method: Method,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[arg(long, default_value = "5", value_parser = parse_snr)]
    pub snr: f64,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated separations in multiples of the resolution.
    /// Defaults to 0, 0.1, ..., 1.4.
    #[arg(long, value_delimiter = ',')]
    pub separations: Option<Vec<f64>>,
    /// Success radius as a fraction of the true separation.
    #[arg(long, default_value_t = SUCCESS_RADIUS)]
    pub success_radius: f64,
    /// Peak threshold relative to the largest magnitude.
    #[arg(long, default_value_t = PEAK_THRESHOLD)]
    pub peak_threshold: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Curve CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StructureArgs {
    #[arg(long, value_parser = parse_object)]
    pub model: TestObject,
    #[arg(long, value_enum)]
    pub method: Method,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[arg(long, default_value = "5", value_parser = parse_snr)]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub nx: usize,
    #[arg(long, default_value_t = 64)]
    pub ny: usize,
    #[arg(long, default_value_t = DEFAULT_TAU_P)]
    pub tau_p: f64,
    #[arg(long, default_value_t = DEFAULT_REL_THRESHOLD)]
    pub rel_threshold: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[arg(long, default_value_t = 9)]
    pub blocks: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    /// Synthetic training fibers, ignored with `--dataset`.
    #[arg(long, default_value_t = 500)]
    pub fibers: usize,
    /// Synthetic held-out fibers for the summary.
    #[arg(long, default_value_t = 200)]
    pub holdout: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value = "5", value_parser = parse_snr)]
    pub snr: f64,
    /// Directory with `echoes.tsr3` (N_e x n x 1) and `truths.tsr3`
    /// (N_z x n x 1) training pairs.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub out_params: PathBuf,
    /// Loss per epoch CSV.
    #[arg(long)]
    pub out_loss: Option<PathBuf>,
    /// Held-out NMSE of the trained network and of plain ISTA.
    #[arg(long)]
    pub out_summary: Option<PathBuf>,
}

fn parse_snr(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() || v == f64::INFINITY => Ok(v),
        _ => Err(format!("'{s}' is not a finite SNR or 'inf'")),
    }
}

fn parse_object(s: &str) -> Result<TestObject, String> {
    TestObject::parse(s).map_err(|e| e.to_string())
}

fn read_text(path: &Path) -> tomosar::Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

/// Thread count from [`THREADS_ENV`]; 0 or unset lets rayon decide.
pub fn thread_count(value: Option<OsString>) -> CliResult<usize> {
    let Some(v) = value else { return Ok(0) };
    v.to_str()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .ok_or_else(|| CliError::usage(format!("{THREADS_ENV} must be a nonnegative integer, got {v:?}")))
}

/// Parses `args`, runs the command on a pool sized by [`THREADS_ENV`] and
/// returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    let result = thread_count(std::env::var_os(THREADS_ENV)).and_then(|n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::usage(format!("cannot start {n} threads: {e}")))
    });
    let result = result.and_then(|pool| pool.install(|| run(cli)));
    match result {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let omit = cli.omit_timing;
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Reconstruct(a) => reconstruct_cmd(a, omit),
        Command::Evaluate(a) => evaluate_cmd(a, omit),
        Command::ResolutionTest(a) => resolution_cmd(a),
        Command::StructureTest(a) => structure_cmd(a, omit),
        Command::TrainLista(a) => train_cmd(a),
    }
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let geometry = a.geometry.load()?;
    let params = object_params(&geometry, a.nx, a.ny, a.seed);
    let (scene, echo, meta) = simulate_scene(a.model, &params, a.snr)?;
    write_tsr3(&a.out_scene, &scene)?;
    write_tsr3(&a.out_echo, &echo)?;
    if let Some(p) = &a.out_meta {
        write_json(p, &meta)?;
    }
    if let Some(p) = &a.out_cloud {
        write_cloud_csv(p, &extract_point_cloud(&scene, DEFAULT_REL_THRESHOLD)?)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ReconstructOutput {
    method: &'static str,
    config: SolverConfig,
    report: SolverReport,
    reconstruction_time_s: f64,
}

fn reconstruct_cmd(a: ReconstructArgs, omit_timing: bool) -> CliResult<()> {
    let geometry = a.geometry.load()?;
    let overrides = a.solver.overrides()?;
    let lista = a.solver.lista_params(a.method)?;
    let echo = read_tsr3(&a.echo)?;
    let steering = SteeringMatrix::from_geometry(&geometry)?;
    let config = SolverConfig::resolve(&steering, &echo, &overrides)?;
    let (out, time) = timed(|| reconstruct(a.method, &echo, &steering, &config, lista.as_ref()));
    let (recon, mut report) = out?;
    write_tsr3(&a.out, &recon)?;
    if let Some(p) = &a.report {
        let mut reconstruction_time_s = time;
        if omit_timing {
            report.wall_time_s = 0.0;
            reconstruction_time_s = 0.0;
        }
        write_json(
            p,
            &ReconstructOutput {
                method: a.method.name(),
                config,
                report,
                reconstruction_time_s,
            },
        )?;
    }
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs, omit_timing: bool) -> CliResult<()> {
    let recon = read_tsr3(&a.recon)?;
    let truth = read_tsr3(&a.truth)?;
    let time = match &a.solver_report {
        Some(p) => {
            let v: serde_json::Value = tomosar::io::read_json(p)?;
            v.get("reconstruction_time_s")
                .and_then(|t| t.as_f64())
                .ok_or_else(|| CliError::usage(format!("'{}' has no reconstruction_time_s", p.display())))?
        }
        None => 0.0,
    };
    let time = if omit_timing { 0.0 } else { time };
    let report = evaluate(&recon, &truth, a.tau_p, a.rel_threshold, time)?;
    write_json(&a.out, &report)?;
    if let Some(p) = &a.out_cloud {
        write_cloud_csv(p, &extract_point_cloud(&recon, a.rel_threshold)?)?;
    }
    Ok(())
}

fn resolution_cmd(a: ResolutionArgs) -> CliResult<()> {
    let geometry = a.geometry.load()?;
    let mut p = ResolutionParams::new(geometry, a.method, a.seed);
    p.separations = a.separations.clone().unwrap_or_else(default_separations);
    p.trials = a.trials;
    p.snr_db = a.snr;
    p.overrides = a.solver.overrides()?;
    p.lista = a.solver.lista_params(a.method)?;
    p.success_radius = a.success_radius;
    p.peak_threshold = a.peak_threshold;
    let curve = run_resolution_study(&p)?;
    std::fs::write(&a.out, curve.to_csv()?).map_err(Error::from)?;
    Ok(())
}

fn structure_cmd(a: StructureArgs, omit_timing: bool) -> CliResult<()> {
    let geometry = a.geometry.load()?;
    let mut p = StructureParams::new(a.model, a.method, geometry, a.seed);
    p.n_x = a.nx;
    p.n_y = a.ny;
    p.snr_db = a.snr;
    p.overrides = a.solver.overrides()?;
    p.lista = a.solver.lista_params(a.method)?;
    p.tau_p = a.tau_p;
    p.rel_threshold = a.rel_threshold;
    let outcome = run_structure_test(&p)?;
    write_bundle(&a.out, a.method, &outcome, omit_timing)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    blocks: usize,
    epochs: usize,
    training_fibers: usize,
    holdout_fibers: usize,
    initial_loss: f64,
    final_loss: f64,
    holdout_nmse_lista: f64,
    holdout_nmse_ista: f64,
}

fn train_cmd(a: TrainArgs) -> CliResult<()> {
    let geometry = a.geometry.load()?;
    let steering = SteeringMatrix::from_geometry(&geometry)?;
    let train = match &a.dataset {
        Some(dir) => load_dataset(dir)?,
        None => FiberDataset::synthetic(&steering, a.fibers, a.snr, a.seed)?,
    };
    if train.is_empty() {
        return Err(CliError::usage("training set is empty"));
    }
    let init = lista_init(&train, &steering, a.blocks)?;
    let (params, trace) = lista_train(&train, &steering, &init, a.epochs, a.lr)?;
    write_json(&a.out_params, &params)?;
    if let Some(p) = &a.out_loss {
        let mut w = csv::Writer::from_path(p).map_err(Error::from)?;
        w.write_record(["epoch", "loss"]).map_err(Error::from)?;
        for (epoch, loss) in trace.iter().enumerate() {
            w.write_record([epoch.to_string(), loss.to_string()])
                .map_err(Error::from)?;
        }
        w.flush().map_err(Error::from)?;
    }
    if let Some(p) = &a.out_summary {
        let holdout = FiberDataset::synthetic(&steering, a.holdout, a.snr, a.seed.wrapping_add(1))?;
        let summary = TrainSummary {
            blocks: params.blocks,
            epochs: a.epochs,
            training_fibers: train.len(),
            holdout_fibers: holdout.len(),
            initial_loss: trace[0],
            final_loss: trace[trace.len() - 1],
            holdout_nmse_lista: normalized_mse(&holdout, |y| lista_infer(y, &steering, &params))?,
            holdout_nmse_ista: plain_ista_nmse(&holdout, &steering, a.blocks)?,
        };
        write_json(p, &summary)?;
    }
    Ok(())
}

/// NMSE of `blocks` plain ISTA iterations with the per-fiber default
/// configuration.
pub fn plain_ista_nmse(data: &FiberDataset, a: &SteeringMatrix, blocks: usize) -> tomosar::Result<f64> {
    normalized_mse(data, |y| {
        let mut cfg = SolverConfig::defaults_for_fiber(a, y);
        cfg.max_outer = blocks;
        cfg.sigma = f64::MIN_POSITIVE;
        Ok(ista_fiber(y, a, &cfg, Variant::Ista)?.0)
    })
}

fn load_dataset(dir: &Path) -> CliResult<FiberDataset> {
    let fibers = |t: &ComplexTensor3| -> Vec<Vec<Complex64>> {
        let d2 = t.dims()[2];
        (0..t.fiber_count()).map(|f| t.fiber(f / d2, f % d2).unwrap()).collect()
    };
    let echoes = read_tsr3(dir.join("echoes.tsr3"))?;
    let truths = read_tsr3(dir.join("truths.tsr3"))?;
    if echoes.dims()[1..] != truths.dims()[1..] {
        return Err(CliError::usage(format!(
            "echo dims {:?} and truth dims {:?} do not pair up",
            echoes.dims(),
            truths.dims()
        )));
    }
    Ok(FiberDataset {
        echoes: fibers(&echoes),
        truths: fibers(&truths),
    })
}
