//! Fiber-wise ISTA/FISTA and slice-wise ISTA.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{relative_change, SolverConfig, SolverReport};
use super::objective::fiber_objective;
use super::prox::shrink;
use crate::error::{Error, Result};
use crate::forward::SteeringMatrix;
use crate::tensor::ComplexTensor3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Ista,
    Fista,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Ista => "ista",
            Variant::Fista => "fista",
        }
    }
}

/// One proximal-gradient step `soft(x + alpha A^H (y - A x), theta)`.
pub(crate) fn ista_step(
    a: &SteeringMatrix,
    y: &[Complex64],
    x: &[Complex64],
    alpha: f64,
    theta: f64,
) -> Vec<Complex64> {
    let ax = a.apply(x);
    let residual: Vec<Complex64> = y.iter().zip(&ax).map(|(u, v)| u - v).collect();
    let g = a.apply_adjoint(&residual);
    x.iter()
        .zip(&g)
        .map(|(xv, gv)| shrink(xv + alpha * gv, theta))
        .collect()
}

fn check_fiber(a: &SteeringMatrix, y: &[Complex64]) -> Result<()> {
    if y.len() != a.rows() {
        return Err(Error::Shape(format!(
            "echo fiber has {} samples, A has {} rows",
            y.len(),
            a.rows()
        )));
    }
    Ok(())
}

fn diff_and_norm(next: &[Complex64], prev: &[Complex64]) -> (f64, f64) {
    let diff = next.iter().zip(prev).map(|(u, v)| (u - v).norm_sqr()).sum();
    let norm = next.iter().map(|z| z.norm_sqr()).sum();
    (diff, norm)
}

/// l1-regularized least squares on one fiber, starting from zero.
///
/// Stops when the relative change drops below `cfg.sigma` or after
/// `cfg.max_outer` iterations; the result is returned either way and
/// `converged` tells which.
pub fn ista_fiber(
    y: &[Complex64],
    a: &SteeringMatrix,
    cfg: &SolverConfig,
    variant: Variant,
) -> Result<(Vec<Complex64>, SolverReport)> {
    check_fiber(a, y)?;
    cfg.validate()?;
    let start = Instant::now();
    let theta = cfg.alpha * cfg.lambda1;
    let zero = Complex64::new(0.0, 0.0);
    let mut x = vec![zero; a.cols()];
    let mut momentum = x.clone();
    let mut t = 1.0f64;
    let mut report = SolverReport {
        method: variant.name().into(),
        ..Default::default()
    };
    for _ in 0..cfg.max_outer {
        let base = match variant {
            Variant::Ista => &x,
            Variant::Fista => &momentum,
        };
        let next = ista_step(a, y, base, cfg.alpha, theta);
        let (diff, norm) = diff_and_norm(&next, &x);
        if variant == Variant::Fista {
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let w = (t - 1.0) / t_next;
            momentum = next.iter().zip(&x).map(|(n, p)| n + (n - p) * w).collect();
            t = t_next;
        }
        x = next;
        let rel = relative_change(diff, norm);
        report.iterations += 1;
        report.objective.push(fiber_objective(a, y, &x, cfg.lambda1));
        report.relative_change.push(rel);
        if rel < cfg.sigma {
            report.converged = true;
            break;
        }
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((x, report))
}

/// Least-squares refit of `x` on its nonzero support.
pub fn debias(y: &[Complex64], a: &SteeringMatrix, x: &[Complex64]) -> Result<Vec<Complex64>> {
    check_fiber(a, y)?;
    if x.len() != a.cols() {
        return Err(Error::Shape(format!(
            "scene fiber has {} cells, A has {} columns",
            x.len(),
            a.cols()
        )));
    }
    let support: Vec<usize> = (0..x.len()).filter(|&n| x[n].norm() > 0.0).collect();
    if support.is_empty() {
        return Ok(x.to_vec());
    }
    let sub = DMatrix::from_fn(a.rows(), support.len(), |m, c| a.entry(m, support[c]));
    let rhs = DVector::from_column_slice(y);
    let coef = sub
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Precondition(format!("support refit failed: {e}")))?;
    let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
    for (c, &n) in support.iter().enumerate() {
        out[n] = coef[c];
    }
    Ok(out)
}

/// Joint ISTA over the columns of one echo slice (`N_e x cols`).
///
/// Every column takes the same gradient step and the same slice-wide
/// threshold `alpha * lambda1`; the stopping test uses the change of the
/// whole slice.
pub fn ista_slice(
    y: &DMatrix<Complex64>,
    a: &SteeringMatrix,
    cfg: &SolverConfig,
) -> Result<(DMatrix<Complex64>, SolverReport)> {
    if y.nrows() != a.rows() {
        return Err(Error::Shape(format!(
            "slice has {} rows, A has {} rows",
            y.nrows(),
            a.rows()
        )));
    }
    cfg.validate()?;
    let start = Instant::now();
    let theta = cfg.alpha * cfg.lambda1;
    let columns: Vec<Vec<Complex64>> = y.column_iter().map(|c| c.iter().copied().collect()).collect();
    let mut xs = vec![vec![Complex64::new(0.0, 0.0); a.cols()]; columns.len()];
    let mut report = SolverReport {
        method: "ista-slice".into(),
        ..Default::default()
    };
    for _ in 0..cfg.max_outer {
        let next: Vec<Vec<Complex64>> = columns
            .iter()
            .zip(&xs)
            .map(|(yc, xc)| ista_step(a, yc, xc, cfg.alpha, theta))
            .collect();
        let (mut diff, mut norm) = (0.0, 0.0);
        for (n, p) in next.iter().zip(&xs) {
            let (d, m) = diff_and_norm(n, p);
            diff += d;
            norm += m;
        }
        xs = next;
        let rel = relative_change(diff, norm);
        report.iterations += 1;
        report.objective.push(
            columns
                .iter()
                .zip(&xs)
                .map(|(yc, xc)| fiber_objective(a, yc, xc, cfg.lambda1))
                .sum(),
        );
        report.relative_change.push(rel);
        if rel < cfg.sigma {
            report.converged = true;
            break;
        }
    }
    let out = DMatrix::from_fn(a.cols(), xs.len(), |r, c| xs[c][r]);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((out, report))
}

/// Fiber-wise ISTA/FISTA over a whole echo tensor. Fibers run
/// independently (and concurrently) with a shared configuration.
pub fn ista_tensor(
    y: &ComplexTensor3,
    a: &SteeringMatrix,
    cfg: &SolverConfig,
    variant: Variant,
) -> Result<(ComplexTensor3, SolverReport)> {
    let [d0, d1, d2] = y.dims();
    if d0 != a.rows() {
        return Err(Error::Shape(format!(
            "echo has {d0} baselines, A has {} rows",
            a.rows()
        )));
    }
    cfg.validate()?;
    let start = Instant::now();
    let results: Vec<(Vec<Complex64>, SolverReport)> = (0..d1 * d2)
        .into_par_iter()
        .map(|f| ista_fiber(&y.fiber_at(f), a, cfg, variant))
        .collect::<Result<_>>()?;
    let (fibers, reports): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let x = ComplexTensor3::from_fibers([a.cols(), d1, d2], &fibers)?;
    let mut report = merge_reports(variant.name(), &reports);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((x, report))
}

/// Combines independent sub-solver reports. Shorter traces are padded
/// with their final value (objective) or zero (relative change); the
/// objective is summed and the relative change is the maximum.
pub(crate) fn merge_reports(method: &str, reports: &[SolverReport]) -> SolverReport {
    let iterations = reports.iter().map(|r| r.iterations).max().unwrap_or(0);
    let mut objective = Vec::with_capacity(iterations);
    let mut rel = Vec::with_capacity(iterations);
    for k in 0..iterations {
        let mut o = 0.0;
        let mut c = 0.0f64;
        for r in reports {
            if let Some(v) = r.objective.get(k).or(r.objective.last()) {
                o += v;
            }
            c = c.max(r.relative_change.get(k).copied().unwrap_or(0.0));
        }
        objective.push(o);
        rel.push(c);
    }
    SolverReport {
        method: method.into(),
        iterations,
        objective,
        relative_change: rel,
        feasibility_gap: Vec::new(),
        wall_time_s: 0.0,
        converged: reports.iter().all(|r| r.converged),
    }
}
