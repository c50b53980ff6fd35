//! Structure-preservation study: simulate one test object, reconstruct it
//! and evaluate the result.

use std::path::Path;

use serde::Serialize;

use tomosar::io::{write_cloud_csv, write_json, write_tsr3};
use tomosar::metrics::{evaluate, extract_point_cloud, timed, EvalReport, DEFAULT_REL_THRESHOLD, DEFAULT_TAU_P};
use tomosar::sim::{ObjectMetadata, PointCloud, TestObject};
use tomosar::solvers::{ConfigOverrides, LearnedIstaParams, SolverConfig, SolverReport};
use tomosar::{ComplexTensor3, Result, SteeringMatrix, SystemGeometry};

use crate::method::{reconstruct, Method};
use crate::scene::{object_params, simulate_scene};

#[derive(Debug, Clone)]
pub struct StructureParams {
    pub object: TestObject,
    pub method: Method,
    pub geometry: SystemGeometry,
    pub n_x: usize,
    pub n_y: usize,
    pub snr_db: f64,
    pub seed: u64,
    pub overrides: ConfigOverrides,
    pub lista: Option<LearnedIstaParams>,
    pub tau_p: f64,
    pub rel_threshold: f64,
}

impl StructureParams {
    pub fn new(object: TestObject, method: Method, geometry: SystemGeometry, seed: u64) -> Self {
        Self {
            object,
            method,
            geometry,
            n_x: 64,
            n_y: 64,
            snr_db: 5.0,
            seed,
            overrides: ConfigOverrides::default(),
            lista: None,
            tau_p: DEFAULT_TAU_P,
            rel_threshold: DEFAULT_REL_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StructureOutcome {
    pub scene: ComplexTensor3,
    pub echo: ComplexTensor3,
    pub recon: ComplexTensor3,
    pub metadata: ObjectMetadata,
    pub config: SolverConfig,
    pub report: SolverReport,
    pub eval: EvalReport,
    pub truth_cloud: PointCloud,
    pub recon_cloud: PointCloud,
}

pub fn run_structure_test(p: &StructureParams) -> Result<StructureOutcome> {
    let params = object_params(&p.geometry, p.n_x, p.n_y, p.seed);
    let (scene, echo, metadata) = simulate_scene(p.object, &params, p.snr_db)?;
    let a = SteeringMatrix::from_geometry(&p.geometry)?;
    let config = SolverConfig::resolve(&a, &echo, &p.overrides)?;
    let (out, time) = timed(|| reconstruct(p.method, &echo, &a, &config, p.lista.as_ref()));
    let (recon, report) = out?;
    let eval = evaluate(&recon, &scene, p.tau_p, p.rel_threshold, time)?;
    let truth_cloud = extract_point_cloud(&scene, p.rel_threshold)?;
    let recon_cloud = extract_point_cloud(&recon, p.rel_threshold)?;
    Ok(StructureOutcome {
        scene,
        echo,
        recon,
        metadata,
        config,
        report,
        eval,
        truth_cloud,
        recon_cloud,
    })
}

#[derive(Serialize)]
struct SolverOutput<'a> {
    method: &'static str,
    config: &'a SolverConfig,
    report: &'a SolverReport,
}

/// Writes `scene.tsr3`, `echo.tsr3`, `recon.tsr3`, `truth_cloud.csv`,
/// `recon_cloud.csv`, `eval.json`, `solver_report.json` and
/// `metadata.json` into `dir`, creating it if needed. With `omit_timing`
/// wall-clock fields are written as zero.
pub fn write_bundle(dir: &Path, method: Method, o: &StructureOutcome, omit_timing: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_tsr3(dir.join("scene.tsr3"), &o.scene)?;
    write_tsr3(dir.join("echo.tsr3"), &o.echo)?;
    write_tsr3(dir.join("recon.tsr3"), &o.recon)?;
    write_cloud_csv(dir.join("truth_cloud.csv"), &o.truth_cloud)?;
    write_cloud_csv(dir.join("recon_cloud.csv"), &o.recon_cloud)?;
    let mut eval = o.eval.clone();
    let mut report = o.report.clone();
    if omit_timing {
        eval.reconstruction_time_s = 0.0;
        report.wall_time_s = 0.0;
    }
    write_json(dir.join("eval.json"), &eval)?;
    write_json(
        dir.join("solver_report.json"),
        &SolverOutput {
            method: method.name(),
            config: &o.config,
            report: &report,
        },
    )?;
    write_json(dir.join("metadata.json"), &o.metadata)
}
