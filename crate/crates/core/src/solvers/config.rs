use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{spectral_norm_sq, SteeringMatrix};
use crate::tensor::ComplexTensor3;

/// Power iterations used when deriving the default step size.
pub const SPECTRAL_ITERS: usize = 50;
pub const DEFAULT_LAMBDA1_SCALE: f64 = 0.05;
pub const DEFAULT_LAMBDA2_RATIO: f64 = 0.1;

/// Hyperparameters shared by all reconstruction methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Gradient step on the data term.
    pub alpha: f64,
    /// l1 weight.
    pub lambda1: f64,
    /// 3D-TV weight.
    pub lambda2: f64,
    /// Bregman penalty.
    pub mu: f64,
    /// Step of the l1 sub-problem.
    pub tau1: f64,
    /// Step of the TV splitting sub-problem.
    pub tau2: f64,
    /// Relative-change stopping tolerance, `||x_k - x_{k-1}||^2 / ||x_k||^2`.
    pub sigma: f64,
    pub max_outer: usize,
    /// Gradient/prox repetitions per sub-problem per outer iteration.
    pub inner_iters: usize,
    /// Split-Bregman iterations of the TV enhancement stage.
    pub enhance_iters: usize,
}

impl SolverConfig {
    /// Defaults derived from the operator and the data:
    /// `alpha = 0.9 / ||A||^2`, `lambda1 = 0.05 ||A^H y||_inf`,
    /// `lambda2 = 0.1 lambda1`, `mu = 1`, `tau1 = 1 / (1/alpha + 8 mu)`,
    /// `tau2 = 1 / mu`.
    pub fn defaults_for(a: &SteeringMatrix, y: &ComplexTensor3) -> Result<Self> {
        let backprojection = a.adjoint(y)?;
        Ok(Self::from_backprojection_max(
            a,
            backprojection.max_abs(),
            &ConfigOverrides::default(),
        ))
    }

    /// As [`Self::defaults_for`] for a single echo fiber.
    pub fn defaults_for_fiber(a: &SteeringMatrix, y: &[Complex64]) -> Self {
        let bp = a.apply_adjoint(y).iter().map(|z| z.norm()).fold(0.0, f64::max);
        Self::from_backprojection_max(a, bp, &ConfigOverrides::default())
    }

    /// Builds a config from defaults with every present override applied.
    pub fn resolve(a: &SteeringMatrix, y: &ComplexTensor3, overrides: &ConfigOverrides) -> Result<Self> {
        let backprojection = a.adjoint(y)?;
        let cfg = Self::from_backprojection_max(a, backprojection.max_abs(), overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_backprojection_max(a: &SteeringMatrix, bp_max: f64, o: &ConfigOverrides) -> Self {
        let alpha = o.alpha.unwrap_or_else(|| 0.9 / spectral_norm_sq(a, SPECTRAL_ITERS));
        let lambda1 = o
            .lambda1
            .unwrap_or(o.lambda1_scale.unwrap_or(DEFAULT_LAMBDA1_SCALE) * bp_max);
        let lambda2 = o
            .lambda2
            .unwrap_or(o.lambda2_ratio.unwrap_or(DEFAULT_LAMBDA2_RATIO) * lambda1);
        let mu = o.mu.unwrap_or(1.0);
        Self {
            alpha,
            lambda1,
            lambda2,
            mu,
            tau1: o.tau1.unwrap_or(1.0 / (1.0 / alpha + 8.0 * mu)),
            tau2: o.tau2.unwrap_or(1.0 / mu),
            sigma: o.sigma.unwrap_or(1e-6),
            max_outer: o.max_outer.unwrap_or(300),
            inner_iters: o.inner_iters.unwrap_or(3),
            enhance_iters: o.enhance_iters.unwrap_or(100),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("mu", self.mu),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::Config(format!("sigma must lie in (0, 1), got {}", self.sigma)));
        }
        if self.max_outer == 0 || self.inner_iters == 0 {
            return Err(Error::Config("max_outer and inner_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Optional overrides, as read from a JSON config or CLI flags. Absent
/// fields fall back to the data-derived defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub alpha: Option<f64>,
    pub lambda1: Option<f64>,
    /// `lambda1 = lambda1_scale * ||A^H y||_inf` when `lambda1` is absent.
    pub lambda1_scale: Option<f64>,
    pub lambda2: Option<f64>,
    /// `lambda2 = lambda2_ratio * lambda1` when `lambda2` is absent.
    pub lambda2_ratio: Option<f64>,
    pub mu: Option<f64>,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub sigma: Option<f64>,
    pub max_outer: Option<usize>,
    pub inner_iters: Option<usize>,
    pub enhance_iters: Option<usize>,
}

impl ConfigOverrides {
    /// Fields set in `other` win.
    pub fn merged_with(&self, other: &ConfigOverrides) -> ConfigOverrides {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigOverrides { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            alpha,
            lambda1,
            lambda1_scale,
            lambda2,
            lambda2_ratio,
            mu,
            tau1,
            tau2,
            sigma,
            max_outer,
            inner_iters,
            enhance_iters
        )
    }
}

/// Iteration history returned by every solver.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub method: String,
    pub iterations: usize,
    /// Objective value after each outer iteration.
    pub objective: Vec<f64>,
    /// Relative change after each outer iteration.
    pub relative_change: Vec<f64>,
    /// Split-Bregman only: `sum_i ||D_i X_i - V_i||_F` after each outer
    /// iteration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feasibility_gap: Vec<f64>,
    pub wall_time_s: f64,
    pub converged: bool,
}

/// `||x_k - x_{k-1}||^2 / ||x_k||^2`, zero when both vanish.
pub(crate) fn relative_change(diff_sq: f64, norm_sq: f64) -> f64 {
    if norm_sq > 0.0 {
        diff_sq / norm_sq
    } else if diff_sq == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::SystemGeometry;

    #[test]
    fn defaults_follow_documented_rules() {
        let g = SystemGeometry::reference(64).unwrap();
        let a = SteeringMatrix::from_geometry(&g).unwrap();
        let y = ComplexTensor3::from_fn([12, 2, 2], |i, j, _| Complex64::new(i as f64, j as f64)).unwrap();
        let cfg = SolverConfig::defaults_for(&a, &y).unwrap();
        assert!((cfg.alpha - 0.9 / 64.0).abs() < 1e-9);
        let bp = a.adjoint(&y).unwrap().max_abs();
        assert_eq!(cfg.lambda1, 0.05 * bp);
        assert_eq!(cfg.lambda2, 0.1 * cfg.lambda1);
        assert_eq!(cfg.tau1, 1.0 / (1.0 / cfg.alpha + 8.0));
        assert_eq!(cfg.tau2, 1.0);
        assert_eq!((cfg.sigma, cfg.max_outer, cfg.inner_iters), (1e-6, 300, 3));
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_take_precedence() {
        let g = SystemGeometry::reference(16).unwrap();
        let a = SteeringMatrix::from_geometry(&g).unwrap();
        let y = ComplexTensor3::from_fn([12, 1, 1], |i, _, _| Complex64::new(1.0, i as f64)).unwrap();
        let file = ConfigOverrides {
            lambda1: Some(2.0),
            mu: Some(3.0),
            ..Default::default()
        };
        let flags = ConfigOverrides {
            mu: Some(5.0),
            ..Default::default()
        };
        let cfg = SolverConfig::resolve(&a, &y, &file.merged_with(&flags)).unwrap();
        assert_eq!(cfg.lambda1, 2.0);
        assert_eq!(cfg.mu, 5.0);
        assert_eq!(cfg.tau2, 1.0 / 5.0);
    }

    #[test]
    fn invalid_values_rejected() {
        let g = SystemGeometry::reference(16).unwrap();
        let a = SteeringMatrix::from_geometry(&g).unwrap();
        let y = ComplexTensor3::from_fn([12, 1, 1], |_, _, _| Complex64::new(1.0, 0.0)).unwrap();
        for o in [
            ConfigOverrides {
                sigma: Some(1.0),
                ..Default::default()
            },
            ConfigOverrides {
                alpha: Some(-1.0),
                ..Default::default()
            },
            ConfigOverrides {
                lambda1: Some(-0.1),
                ..Default::default()
            },
            ConfigOverrides {
                max_outer: Some(0),
                ..Default::default()
            },
        ] {
            assert!(
                matches!(SolverConfig::resolve(&a, &y, &o), Err(Error::Config(_))),
                "{o:?}"
            );
        }
    }

    #[test]
    fn relative_change_edge_cases() {
        assert_eq!(relative_change(0.0, 0.0), 0.0);
        assert_eq!(relative_change(1.0, 0.0), f64::INFINITY);
        assert_eq!(relative_change(1.0, 4.0), 0.25);
    }
}
