//! l1 + 3D-TV reconstruction by proximal gradient with a Split-Bregman
//! inner solver on the three slice folds.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{relative_change, SolverConfig, SolverReport};
use super::objective::objective_eval;
use super::prox::shrink;
use crate::error::{Error, Result};
use crate::forward::SteeringMatrix;
use crate::tensor::{Axis, ComplexTensor3, FoldedMatrix};

/// TV weight of each per-axis sub-problem in units of `lambda2`, so that
/// the mean of the three per-axis problems is the proximal problem of
/// `lambda1 ||X||_1 + lambda2 TV(X)`.
pub const AXIS_TV_WEIGHT: f64 = 3.0;

/// Per-axis Split-Bregman variables, all in the layout of `fold_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BregmanState {
    pub axis: Axis,
    /// Sub-problem solution `X_i`.
    pub x: FoldedMatrix,
    /// Splitting variable `V_i`, standing in for `D_i X_i`.
    pub v: FoldedMatrix,
    /// Bregman dual `B_i`.
    pub b: FoldedMatrix,
}

impl BregmanState {
    fn new(axis: Axis, x0: &ComplexTensor3) -> Self {
        let x = x0.fold(axis.into());
        let v = x.diff_columns();
        let b = FoldedMatrix::zeros_like(&x);
        Self { axis, x, v, b }
    }

    /// Steps 2 to 5 for this axis. Returns `||D_i X_i - V_i||_F`.
    fn update(&mut self, z: &ComplexTensor3, cfg: &SolverConfig) -> f64 {
        let zi = z.fold(self.axis.into());
        let inv_alpha = 1.0 / cfg.alpha;

        // p_i = Z_i / alpha + mu D^H (V_i - B_i)
        let mut vb = self.v.clone();
        for (d, b) in vb.data_mut().iter_mut().zip(self.b.data()) {
            *d -= b;
        }
        let mut p = vb.diff_columns_adjoint();
        for (pv, zv) in p.data_mut().iter_mut().zip(zi.data()) {
            *pv = zv * inv_alpha + *pv * cfg.mu;
        }

        let t1 = cfg.lambda1 * cfg.tau1;
        for _ in 0..cfg.inner_iters {
            let dtd = self.x.diff_columns().diff_columns_adjoint();
            for ((xv, q), pv) in self.x.data_mut().iter_mut().zip(dtd.data()).zip(p.data()) {
                let grad = *xv * inv_alpha + q * cfg.mu - pv;
                *xv = shrink(*xv - grad * cfg.tau1, t1);
            }
        }

        let dx = self.x.diff_columns();
        let t2 = AXIS_TV_WEIGHT * cfg.lambda2 * cfg.tau2;
        for _ in 0..cfg.inner_iters {
            for ((vv, d), b) in self.v.data_mut().iter_mut().zip(dx.data()).zip(self.b.data()) {
                let grad = (*vv - d - b) * cfg.mu;
                *vv = shrink(*vv - grad * cfg.tau2, t2);
            }
        }

        let mut gap = 0.0;
        for ((b, d), v) in self.b.data_mut().iter_mut().zip(dx.data()).zip(self.v.data()) {
            let r = d - v;
            *b += r;
            gap += r.norm_sqr();
        }
        gap.sqrt()
    }
}

/// Outcome of one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub objective: f64,
    pub relative_change: f64,
    /// `sum_i ||D_i X_i - V_i||_F`.
    pub feasibility_gap: f64,
}

/// Iteration state of the l1/TV solver, advanced one outer iteration at a
/// time by [`SplitBregman::step`].
#[derive(Debug, Clone)]
pub struct SplitBregman<'a> {
    y: &'a ComplexTensor3,
    a: &'a SteeringMatrix,
    cfg: SolverConfig,
    x: ComplexTensor3,
    states: [BregmanState; 3],
    initial_objective: f64,
    report: SolverReport,
}

impl<'a> SplitBregman<'a> {
    /// Starts from `X = 0`.
    pub fn new(y: &'a ComplexTensor3, a: &'a SteeringMatrix, cfg: &SolverConfig) -> Result<Self> {
        let [d0, d1, d2] = y.dims();
        if d0 != a.rows() {
            return Err(Error::Shape(format!(
                "echo has {d0} baselines, A has {} rows",
                a.rows()
            )));
        }
        cfg.validate()?;
        let x = ComplexTensor3::zeros([a.cols(), d1, d2])?;
        let states = Axis::ALL.map(|axis| BregmanState::new(axis, &x));
        let initial_objective = objective_eval(&x, y, a, cfg.lambda1, cfg.lambda2)?;
        Ok(Self {
            y,
            a,
            cfg: *cfg,
            x,
            states,
            initial_objective,
            report: SolverReport {
                method: "sb-tv".into(),
                ..Default::default()
            },
        })
    }

    pub fn x(&self) -> &ComplexTensor3 {
        &self.x
    }

    pub fn states(&self) -> &[BregmanState; 3] {
        &self.states
    }

    pub fn report(&self) -> &SolverReport {
        &self.report
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// One outer iteration: gradient step on the data term, the three
    /// per-fold sub-problems, then the average of the unfolded results.
    pub fn step(&mut self) -> Result<StepInfo> {
        let cfg = self.cfg;
        let residual = self.a.forward(&self.x)?.sub(self.y)?;
        let grad = self.a.adjoint(&residual)?;
        let alpha = Complex64::new(cfg.alpha, 0.0);
        let z = self.x.zip_map(&grad, |xv, gv| xv - alpha * gv)?;

        let gaps: Vec<f64> = self.states.par_iter_mut().map(|s| s.update(&z, &cfg)).collect();
        let gap = gaps.iter().sum();

        let dims = self.x.dims();
        let parts = self
            .states
            .iter()
            .map(|s| s.x.unfold(dims))
            .collect::<Result<Vec<_>>>()?;
        let third = 1.0 / 3.0;
        let next = parts[0]
            .zip_map(&parts[1], |u, v| u + v)?
            .zip_map(&parts[2], |u, v| (u + v) * third)?;

        let diff = next.sub(&self.x)?.norm_sqr();
        let rel = relative_change(diff, next.norm_sqr());
        self.x = next;
        let objective = objective_eval(&self.x, self.y, self.a, cfg.lambda1, cfg.lambda2)?;
        let r = &mut self.report;
        r.iterations += 1;
        r.objective.push(objective);
        r.relative_change.push(rel);
        r.feasibility_gap.push(gap);
        if !objective.is_finite() || objective > 10.0 * self.initial_objective {
            return Err(Error::Divergence {
                iteration: r.iterations,
                objective,
                trace: r.objective.clone(),
            });
        }
        Ok(StepInfo {
            objective,
            relative_change: rel,
            feasibility_gap: gap,
        })
    }

    pub fn into_parts(self) -> (ComplexTensor3, SolverReport) {
        (self.x, self.report)
    }
}

/// Runs [`SplitBregman`] until the relative change falls below
/// `cfg.sigma` or `cfg.max_outer` iterations have run.
pub fn split_bregman_l1tv(
    y: &ComplexTensor3,
    a: &SteeringMatrix,
    cfg: &SolverConfig,
) -> Result<(ComplexTensor3, SolverReport)> {
    let start = Instant::now();
    let mut solver = SplitBregman::new(y, a, cfg)?;
    let mut converged = false;
    for _ in 0..cfg.max_outer {
        if solver.step()?.relative_change < cfg.sigma {
            converged = true;
            break;
        }
    }
    let (x, mut report) = solver.into_parts();
    report.converged = converged;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::SystemGeometry;
    use crate::tensor::FoldAxis;

    fn op(n_z: usize) -> SteeringMatrix {
        SteeringMatrix::from_geometry(&SystemGeometry::uniform(12, n_z).unwrap()).unwrap()
    }

    #[test]
    fn zero_echo_is_a_fixed_point() {
        let a = op(16);
        let y = ComplexTensor3::zeros([12, 4, 4]).unwrap();
        let cfg = SolverConfig::defaults_for(&a, &y).unwrap();
        let (x, rep) = split_bregman_l1tv(&y, &a, &cfg).unwrap();
        assert!(x.data().iter().all(|z| z.norm() == 0.0));
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
    }

    #[test]
    fn single_scatterer_support_recovered() {
        let a = op(16);
        let mut truth = ComplexTensor3::zeros([16, 8, 8]).unwrap();
        let off = truth.offset(5, 3, 4);
        truth.data_mut()[off] = Complex64::new(2.0, 1.0);
        let y = a.forward(&truth).unwrap();
        let cfg = SolverConfig::defaults_for(&a, &y).unwrap();
        let (x, rep) = split_bregman_l1tv(&y, &a, &cfg).unwrap();
        let peak = x.max_abs();
        let strong: Vec<usize> = (0..x.len()).filter(|&i| x.data()[i].norm() > 0.5 * peak).collect();
        assert_eq!(strong, vec![off]);
        assert_eq!(rep.objective.len(), rep.iterations);
        assert_eq!(rep.feasibility_gap.len(), rep.iterations);
    }

    #[test]
    fn recombination_is_the_mean_of_unfolded_axis_results() {
        let a = op(8);
        let truth = ComplexTensor3::from_fn([8, 3, 4], |i, j, k| {
            Complex64::new(((i + j) % 3) as f64, (k % 2) as f64)
        })
        .unwrap();
        let y = a.forward(&truth).unwrap();
        let cfg = SolverConfig::defaults_for(&a, &y).unwrap();
        let mut sb = SplitBregman::new(&y, &a, &cfg).unwrap();
        for _ in 0..4 {
            sb.step().unwrap();
        }
        let dims = sb.x().dims();
        let axes: Vec<FoldAxis> = sb.states().iter().map(|s| s.x.fold_axis()).collect();
        assert_eq!(axes, vec![FoldAxis::Horizontal, FoldAxis::Lateral, FoldAxis::Frontal]);
        let parts: Vec<ComplexTensor3> = sb.states().iter().map(|s| s.x.unfold(dims).unwrap()).collect();
        for n in 0..sb.x().len() {
            let mean = (parts[0].data()[n] + parts[1].data()[n] + parts[2].data()[n]) / 3.0;
            assert!((mean - sb.x().data()[n]).norm() < 1e-14);
        }
    }

    #[test]
    fn divergence_guard_reports_trace() {
        let a = op(8);
        let truth = ComplexTensor3::from_fn([8, 2, 2], |i, _, _| Complex64::new(i as f64, 1.0)).unwrap();
        let y = a.forward(&truth).unwrap();
        let mut cfg = SolverConfig::defaults_for(&a, &y).unwrap();
        cfg.alpha = 1.0;
        cfg.tau1 = 1.0 / (1.0 + 8.0 * cfg.mu);
        let err = split_bregman_l1tv(&y, &a, &cfg).unwrap_err();
        match err {
            Error::Divergence { iteration, trace, .. } => assert_eq!(trace.len(), iteration),
            e => panic!("unexpected {e:?}"),
        }
    }
}
