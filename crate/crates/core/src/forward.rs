//! Multi-baseline measurement model `y = A x + n`.
//!
//! The steering matrix maps an elevation reflectivity profile onto the
//! `N_e` baseline samples:
//!
//! ```text
//! A[m, n] = exp(+j * 4 * pi * s_n * b_m / (wavelength * R0))
//! ```
//!
//! Tensor operators apply `A` (or `A^H`) to every axis-0 fiber.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ComplexTensor3;

/// Reference system parameters of the simulated airborne array.
pub mod reference {
    pub const WAVELENGTH_M: f64 = 0.031;
    pub const FLYOVERS: usize = 12;
    pub const SLANT_RANGE_M: f64 = 2040.3406;
    pub const INCIDENCE_DEG: f64 = 31.6453;
    pub const HEIGHT_M: f64 = 1736.9668;
    pub const SNR_DB: f64 = 5.0;
    /// Spacing of the default uniform baseline set.
    pub const BASELINE_SPACING_M: f64 = 1.0;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemGeometry {
    #[serde(rename = "wavelength_m")]
    pub wavelength: f64,
    #[serde(rename = "baselines_m")]
    pub baselines: Vec<f64>,
    #[serde(rename = "reference_slant_range_m")]
    pub reference_slant_range: f64,
    #[serde(rename = "reference_incidence_deg")]
    pub reference_incidence_deg: f64,
    #[serde(rename = "elevation_grid_m")]
    pub elevation_grid: Vec<f64>,
}

impl SystemGeometry {
    pub fn new(
        wavelength: f64,
        baselines: Vec<f64>,
        reference_slant_range: f64,
        reference_incidence_deg: f64,
        elevation_grid: Vec<f64>,
    ) -> Result<Self> {
        let g = Self {
            wavelength,
            baselines,
            reference_slant_range,
            reference_incidence_deg,
            elevation_grid,
        };
        g.validate()?;
        Ok(g)
    }

    /// Reference geometry with `n_e` uniformly spaced baselines centred on
    /// zero and an `n_z`-cell elevation grid spanning exactly one ambiguity
    /// interval `wavelength * R0 / (2 * spacing)`. On that grid `A` is a row
    /// subset of an `n_z`-point DFT up to unimodular diagonal factors, so
    /// `||A||_2^2 = n_z` whenever `n_e <= n_z`.
    pub fn uniform(n_e: usize, n_z: usize) -> Result<Self> {
        use reference::*;
        let spacing = BASELINE_SPACING_M;
        let centre = (n_e as f64 - 1.0) / 2.0;
        let baselines = (0..n_e).map(|m| (m as f64 - centre) * spacing).collect();
        let cell = WAVELENGTH_M * SLANT_RANGE_M / (2.0 * spacing * n_z as f64);
        let half = (n_z / 2) as f64;
        let grid = (0..n_z).map(|n| (n as f64 - half) * cell).collect();
        Self::new(WAVELENGTH_M, baselines, SLANT_RANGE_M, INCIDENCE_DEG, grid)
    }

    /// [`Self::uniform`] with the reference number of flyovers.
    pub fn reference(n_z: usize) -> Result<Self> {
        Self::uniform(reference::FLYOVERS, n_z)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        if !(self.wavelength > 0.0 && finite(self.wavelength)) {
            return Err(Error::Config(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        if !(self.reference_slant_range > 0.0 && finite(self.reference_slant_range)) {
            return Err(Error::Config(format!(
                "reference slant range must be positive, got {}",
                self.reference_slant_range
            )));
        }
        if !finite(self.reference_incidence_deg) {
            return Err(Error::Config("reference incidence angle must be finite".into()));
        }
        if self.baselines.len() < 2 {
            return Err(Error::Config(format!(
                "need at least 2 baselines, got {}",
                self.baselines.len()
            )));
        }
        if self.elevation_grid.len() < 2 {
            return Err(Error::Config(format!(
                "need at least 2 elevation cells, got {}",
                self.elevation_grid.len()
            )));
        }
        if self.baselines.iter().chain(&self.elevation_grid).any(|v| !finite(*v)) {
            return Err(Error::Config("baselines and elevation grid must be finite".into()));
        }
        if self.elevation_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("elevation grid must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn n_e(&self) -> usize {
        self.baselines.len()
    }

    pub fn n_z(&self) -> usize {
        self.elevation_grid.len()
    }

    /// Mean elevation cell size.
    pub fn elevation_cell(&self) -> f64 {
        let g = &self.elevation_grid;
        (g[g.len() - 1] - g[0]) / (g.len() - 1) as f64
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }
}

/// Matched-filter elevation resolution `wavelength * R0 / (2 * aperture)`.
pub fn theoretical_resolution(g: &SystemGeometry) -> Result<f64> {
    let (lo, hi) = g
        .baselines
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &b| {
            (lo.min(b), hi.max(b))
        });
    let aperture = hi - lo;
    if !(aperture > 0.0) {
        return Err(Error::Config("baseline aperture is zero".into()));
    }
    Ok(g.wavelength * g.reference_slant_range / (2.0 * aperture))
}

/// Dense `N_e x N_z` steering matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl SteeringMatrix {
    pub fn from_geometry(g: &SystemGeometry) -> Result<Self> {
        g.validate()?;
        let k = 4.0 * std::f64::consts::PI / (g.wavelength * g.reference_slant_range);
        let entries = g
            .baselines
            .iter()
            .flat_map(|&b| {
                g.elevation_grid
                    .iter()
                    .map(move |&s| Complex64::from_polar(1.0, k * s * b))
            })
            .collect();
        Ok(Self {
            rows: g.n_e(),
            cols: g.n_z(),
            entries,
        })
    }

    /// Arbitrary dense operator; used for oracles and synthetic tests.
    pub fn from_rows(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    /// Number of baselines `N_e`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of elevation cells `N_z`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn entry(&self, m: usize, n: usize) -> Complex64 {
        self.entries[m * self.cols + n]
    }

    pub fn column(&self, n: usize) -> Vec<Complex64> {
        (0..self.rows).map(|m| self.entry(m, n)).collect()
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `A x` for one fiber.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.cols);
        self.entries
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, v)| a * v).sum())
            .collect()
    }

    /// `A^H y` for one fiber.
    pub fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for (row, yv) in self.entries.chunks_exact(self.cols).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * yv;
            }
        }
        out
    }

    /// Fiber-wise forward operator: every output fiber is `A` times the
    /// matching scene fiber.
    pub fn forward(&self, x: &ComplexTensor3) -> Result<ComplexTensor3> {
        let [d0, d1, d2] = x.dims();
        if d0 != self.cols {
            return Err(Error::Shape(format!(
                "scene has {d0} elevation cells, A has {} columns",
                self.cols
            )));
        }
        let out = mat_rows(&self.entries, self.rows, self.cols, x.data(), d1 * d2, false);
        Ok(ComplexTensor3::from_parts([self.rows, d1, d2], out))
    }

    /// Fiber-wise `A^H`, the exact adjoint of [`Self::forward`].
    pub fn adjoint(&self, y: &ComplexTensor3) -> Result<ComplexTensor3> {
        let [d0, d1, d2] = y.dims();
        if d0 != self.rows {
            return Err(Error::Shape(format!(
                "echo has {d0} baselines, A has {} rows",
                self.rows
            )));
        }
        let out = mat_rows(&self.entries, self.rows, self.cols, y.data(), d1 * d2, true);
        Ok(ComplexTensor3::from_parts([self.cols, d1, d2], out))
    }
}

/// Row-major product of `A` (or `A^H`) with a row-major `(inner, width)`
/// block. Each output row is computed independently in a fixed order, so
/// results do not depend on how rows are scheduled.
fn mat_rows(
    a: &[Complex64],
    rows: usize,
    cols: usize,
    src: &[Complex64],
    width: usize,
    hermitian: bool,
) -> Vec<Complex64> {
    let (out_rows, inner) = if hermitian { (cols, rows) } else { (rows, cols) };
    let mut out = vec![Complex64::new(0.0, 0.0); out_rows * width];
    let body = |(r, dst): (usize, &mut [Complex64])| {
        for t in 0..inner {
            let coef = if hermitian {
                a[t * cols + r].conj()
            } else {
                a[r * cols + t]
            };
            for (d, s) in dst.iter_mut().zip(&src[t * width..(t + 1) * width]) {
                *d += coef * s;
            }
        }
    };
    if out_rows * width * inner >= 1 << 15 {
        out.par_chunks_mut(width).enumerate().for_each(body);
    } else {
        out.chunks_mut(width).enumerate().for_each(body);
    }
    out
}

/// Adds circular complex Gaussian noise at the requested SNR, where signal
/// power is the mean `|y|^2` over all entries. `f64::INFINITY` returns the
/// input unchanged.
///
/// Each axis-0 fiber draws from its own ChaCha stream keyed by
/// `(seed, fiber index)`.
pub fn add_noise(y: &ComplexTensor3, snr_db: f64, seed: u64) -> Result<ComplexTensor3> {
    if snr_db == f64::INFINITY {
        return Ok(y.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::Parameter(format!("SNR must be finite or +inf, got {snr_db}")));
    }
    let power = y.norm_sqr() / y.len() as f64;
    if power == 0.0 {
        return Err(Error::Precondition("cannot set a finite SNR on a zero signal".into()));
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
    let [d0, d1, d2] = y.dims();
    let fibers = d1 * d2;
    let noise: Vec<Vec<Complex64>> = (0..fibers)
        .into_par_iter()
        .map(|f| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(f as u64);
            (0..d0)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(sigma * re, sigma * im)
                })
                .collect()
        })
        .collect();
    let mut out = y.clone();
    let data = out.data_mut();
    for (f, n) in noise.iter().enumerate() {
        for (i, v) in n.iter().enumerate() {
            data[i * fibers + f] += v;
        }
    }
    Ok(out)
}

/// Power-iteration estimate of `||A||_2^2` (largest eigenvalue of `A^H A`).
///
/// Returns the Rayleigh quotient `||A v||^2` of the normalized iterate,
/// which never decreases with `iters` and never exceeds `||A||_F^2`.
pub fn spectral_norm_sq(a: &SteeringMatrix, iters: usize) -> f64 {
    let n = a.cols();
    // fixed, non-symmetric start so DFT-structured operators are not hit
    // on an invariant subspace
    let mut v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::from_polar(1.0 + (i as f64 * 0.618_033_988_75).fract(), 0.7 * i as f64 + 0.3))
        .collect();
    normalize(&mut v);
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let av = a.apply(&v);
        estimate = av.iter().map(|z| z.norm_sqr()).sum();
        v = a.apply_adjoint(&av);
        if !normalize(&mut v) {
            break;
        }
    }
    estimate
}

fn normalize(v: &mut [Complex64]) -> bool {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return false;
    }
    v.iter_mut().for_each(|z| *z /= norm);
    true
}
