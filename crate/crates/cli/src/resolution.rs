//! Monte Carlo two-scatterer resolution study.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use tomosar::forward::{theoretical_resolution, SteeringMatrix, SystemGeometry};
use tomosar::sim::TestObject;
use tomosar::solvers::{ConfigOverrides, LearnedIstaParams, SolverConfig};
use tomosar::{ComplexTensor3, Error, Result};

use crate::method::{reconstruct, Method};
use crate::scene::{object_params, simulate_scene};

/// Peak height threshold relative to the global maximum.
pub const PEAK_THRESHOLD: f64 = 0.25;
/// Each peak must lie within this fraction of the true gap of its truth.
pub const SUCCESS_RADIUS: f64 = 0.5;
/// Default `lambda1` is this many noise standard deviations of a
/// matched-filter output, `sigma_n * sqrt(N_e)`.
pub const NOISE_LAMBDA_FACTOR: f64 = 2.25;

#[derive(Debug, Clone)]
pub struct ResolutionParams {
    pub geometry: SystemGeometry,
    /// Separations in multiples of the matched-filter resolution.
    pub separations: Vec<f64>,
    pub trials: usize,
    pub snr_db: f64,
    pub method: Method,
    pub seed: u64,
    pub overrides: ConfigOverrides,
    pub lista: Option<LearnedIstaParams>,
    pub peak_threshold: f64,
    pub success_radius: f64,
}

impl ResolutionParams {
    pub fn new(geometry: SystemGeometry, method: Method, seed: u64) -> Self {
        Self {
            geometry,
            separations: default_separations(),
            trials: 500,
            snr_db: 5.0,
            method,
            seed,
            overrides: ConfigOverrides::default(),
            lista: None,
            peak_threshold: PEAK_THRESHOLD,
            success_radius: SUCCESS_RADIUS,
        }
    }
}

/// `0, 0.1, ..., 1.4`.
pub fn default_separations() -> Vec<f64> {
    (0..=14).map(|i| i as f64 / 10.0).collect()
}

/// One row of the curve. Position estimates are the two strongest peaks
/// of trials with at least two peaks, lower one first, in multiples of
/// the resolution relative to the midpoint of the true pair. `None` when
/// no trial produced two peaks. Standard deviations are population ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionRow {
    pub separation: f64,
    pub success_rate: f64,
    pub mean_pos1: Option<f64>,
    pub std_pos1: Option<f64>,
    pub mean_pos2: Option<f64>,
    pub std_pos2: Option<f64>,
    pub trials: usize,
    /// Reserved; always empty.
    pub crlb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionCurve {
    pub rows: Vec<ResolutionRow>,
}

impl ResolutionCurve {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "separation",
            "success_rate",
            "mean_pos1",
            "std_pos1",
            "mean_pos2",
            "std_pos2",
            "trials",
            "crlb",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.separation.to_string(),
                r.success_rate.to_string(),
                opt(r.mean_pos1),
                opt(r.std_pos1),
                opt(r.mean_pos2),
                opt(r.std_pos2),
                r.trials.to_string(),
                opt(r.crlb),
            ])?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// Local maxima of `mag` at or above `rel * max`, with one-bin
/// non-maximum suppression: a bin is a peak when it exceeds its left
/// neighbour and is not below its right one. Ascending order.
pub fn find_peaks(mag: &[f64], rel: f64) -> Vec<usize> {
    let peak = mag.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Vec::new();
    }
    let cut = rel * peak;
    (0..mag.len())
        .filter(|&n| {
            let v = mag[n];
            v >= cut && (n == 0 || v > mag[n - 1]) && (n + 1 == mag.len() || v >= mag[n + 1])
        })
        .collect()
}

/// Trial `t` draws its phases and noise from stream `t` at every
/// separation, so neighbouring points of the curve share realizations.
struct Trial {
    success: bool,
    estimates: Option<(f64, f64)>,
}

pub fn run_resolution_study(p: &ResolutionParams) -> Result<ResolutionCurve> {
    if p.trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    if let Some(bad) = p.separations.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::Config(format!("separation must be >= 0, got {bad}")));
    }
    if p.method == Method::Lista && p.lista.is_none() {
        return Err(Error::Config("lista needs a parameter file".into()));
    }
    let a = SteeringMatrix::from_geometry(&p.geometry)?;
    let rho = theoretical_resolution(&p.geometry)?;
    let mut separations = p.separations.clone();
    separations.sort_by(f64::total_cmp);

    let mut rows = Vec::with_capacity(separations.len());
    for &sep in &separations {
        let trials: Vec<Trial> = (0..p.trials)
            .into_par_iter()
            .map(|t| run_trial(p, &a, rho, sep, t as u64))
            .collect::<Result<_>>()?;
        let successes = trials.iter().filter(|t| t.success).count();
        let est: Vec<(f64, f64)> = trials.iter().filter_map(|t| t.estimates).collect();
        let (m1, s1) = mean_std(est.iter().map(|e| e.0));
        let (m2, s2) = mean_std(est.iter().map(|e| e.1));
        rows.push(ResolutionRow {
            separation: sep,
            success_rate: successes as f64 / p.trials as f64,
            mean_pos1: m1,
            std_pos1: s1,
            mean_pos2: m2,
            std_pos2: s2,
            trials: p.trials,
            crlb: None,
        });
    }
    Ok(ResolutionCurve { rows })
}

fn run_trial(p: &ResolutionParams, a: &SteeringMatrix, rho: f64, sep: f64, stream: u64) -> Result<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(stream);
    let params = object_params(&p.geometry, 1, 1, rng.random());
    let (_, echo, meta) = simulate_scene(TestObject::TwoScatterers { separation: sep }, &params, p.snr_db)?;
    let mut overrides = p.overrides.clone();
    if overrides.lambda1.is_none() && overrides.lambda1_scale.is_none() {
        overrides.lambda1 = noise_lambda(&echo, p.snr_db, a.rows());
    }
    let cfg = SolverConfig::resolve(a, &echo, &overrides)?;
    let (x, _) = reconstruct(p.method, &echo, a, &cfg, p.lista.as_ref())?;
    let mag: Vec<f64> = x.data().iter().map(|z| z.norm()).collect();
    let peaks = find_peaks(&mag, p.peak_threshold);

    let grid = &p.geometry.elevation_grid;
    let truth: Vec<usize> = meta.scatterers.iter().map(|s| s[0]).collect();
    let mid = truth.iter().map(|&t| grid[t]).sum::<f64>() / truth.len() as f64;
    let gap = meta.separation_cells.unwrap_or(0) as f64;

    let success = truth.len() == 2 && peaks.len() == 2 && {
        let radius = p.success_radius * gap;
        (peaks[0] as f64 - truth[0] as f64).abs() <= radius && (peaks[1] as f64 - truth[1] as f64).abs() <= radius
    };
    let estimates = (peaks.len() >= 2).then(|| {
        let mut strongest = peaks.clone();
        strongest.sort_by(|&i, &j| mag[j].total_cmp(&mag[i]).then(i.cmp(&j)));
        let (lo, hi) = (strongest[0].min(strongest[1]), strongest[0].max(strongest[1]));
        ((grid[lo] - mid) / rho, (grid[hi] - mid) / rho)
    });
    Ok(Trial { success, estimates })
}

/// Noise-calibrated `lambda1` for a known SNR: the noise variance is
/// estimated from the echo power as `P_y / (1 + snr)`. `None` at infinite
/// SNR.
pub fn noise_lambda(echo: &ComplexTensor3, snr_db: f64, n_e: usize) -> Option<f64> {
    if !snr_db.is_finite() {
        return None;
    }
    let power = echo.norm_sqr() / echo.len() as f64;
    let noise_var = power / (1.0 + 10f64.powf(snr_db / 10.0));
    Some(NOISE_LAMBDA_FACTOR * (noise_var * n_e as f64).sqrt())
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (Option<f64>, Option<f64>) {
    let n = values.clone().count();
    if n == 0 {
        return (None, None);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (Some(mean), Some(var.sqrt()))
}
