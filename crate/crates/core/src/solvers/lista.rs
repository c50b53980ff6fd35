//! Unrolled ISTA with one trainable step and threshold per block.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use std::time::Instant;

use super::config::{relative_change, SolverConfig, SolverReport, SPECTRAL_ITERS};
use super::ista::ista_step;
use super::objective::objective_eval;
use super::prox::shrink;
use crate::error::{Error, Result};
use crate::forward::{add_noise, spectral_norm_sq, SteeringMatrix};
use crate::tensor::ComplexTensor3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedIstaParams {
    pub blocks: usize,
    pub alpha: Vec<f64>,
    pub theta: Vec<f64>,
}

impl LearnedIstaParams {
    pub fn new(alpha: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        let p = Self {
            blocks: alpha.len(),
            alpha,
            theta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Every block uses `alpha` and `alpha * lambda1`, i.e. plain ISTA.
    pub fn ista_equivalent(blocks: usize, alpha: f64, lambda1: f64) -> Result<Self> {
        Self::new(vec![alpha; blocks], vec![alpha * lambda1; blocks])
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 {
            return Err(Error::Config("need at least one block".into()));
        }
        if self.alpha.len() != self.blocks || self.theta.len() != self.blocks {
            return Err(Error::Config(format!(
                "{} blocks but {} steps and {} thresholds",
                self.blocks,
                self.alpha.len(),
                self.theta.len()
            )));
        }
        if self
            .alpha
            .iter()
            .chain(&self.theta)
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(Error::Config("block parameters must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    fn flat(&self) -> Vec<f64> {
        self.alpha.iter().chain(&self.theta).copied().collect()
    }

    fn from_flat(blocks: usize, v: &[f64]) -> Self {
        Self {
            blocks,
            alpha: v[..blocks].to_vec(),
            theta: v[blocks..].to_vec(),
        }
    }
}

/// Runs the `K` blocks on one echo fiber, starting from zero.
pub fn lista_infer(y: &[Complex64], a: &SteeringMatrix, params: &LearnedIstaParams) -> Result<Vec<Complex64>> {
    params.validate()?;
    if y.len() != a.rows() {
        return Err(Error::Shape(format!(
            "echo fiber has {} samples, A has {} rows",
            y.len(),
            a.rows()
        )));
    }
    Ok(run_blocks(a, y, &params.alpha, &params.theta))
}

fn run_blocks(a: &SteeringMatrix, y: &[Complex64], alpha: &[f64], theta: &[f64]) -> Vec<Complex64> {
    let mut x = vec![Complex64::new(0.0, 0.0); a.cols()];
    for (&al, &th) in alpha.iter().zip(theta) {
        x = ista_step(a, y, &x, al, th);
    }
    x
}

/// [`lista_infer`] on every fiber of an echo tensor, run block by block
/// on the whole tensor. The report objective after block `k` uses
/// `lambda1 = theta_k / alpha_k`.
pub fn lista_tensor(
    y: &ComplexTensor3,
    a: &SteeringMatrix,
    params: &LearnedIstaParams,
) -> Result<(ComplexTensor3, SolverReport)> {
    params.validate()?;
    let [d0, d1, d2] = y.dims();
    if d0 != a.rows() {
        return Err(Error::Shape(format!(
            "echo has {d0} baselines, A has {} rows",
            a.rows()
        )));
    }
    let start = Instant::now();
    let mut x = ComplexTensor3::zeros([a.cols(), d1, d2])?;
    let mut report = SolverReport {
        method: "lista".into(),
        ..Default::default()
    };
    for (&al, &th) in params.alpha.iter().zip(&params.theta) {
        let residual = y.sub(&a.forward(&x)?)?;
        let g = a.adjoint(&residual)?;
        let next = x.zip_map(&g, |xv, gv| shrink(xv + al * gv, th))?;
        let diff = next.sub(&x)?.norm_sqr();
        report.relative_change.push(relative_change(diff, next.norm_sqr()));
        x = next;
        let lambda1 = if al > 0.0 { th / al } else { 0.0 };
        report.objective.push(objective_eval(&x, y, a, lambda1, 0.0)?);
        report.iterations += 1;
    }
    report.converged = true;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((x, report))
}

/// Paired echo and ground-truth fibers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FiberDataset {
    pub echoes: Vec<Vec<Complex64>>,
    pub truths: Vec<Vec<Complex64>>,
}

impl FiberDataset {
    /// `n` fibers with 1 to 3 scatterers at distinct random cells,
    /// amplitude uniform in `[1, 4]`, uniform phase, and noise at `snr_db`.
    pub fn synthetic(a: &SteeringMatrix, n: usize, snr_db: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Self::default();
        for _ in 0..n {
            let mut x = vec![Complex64::new(0.0, 0.0); a.cols()];
            let count = rng.random_range(1..=3usize.min(a.cols()));
            let mut placed = 0;
            while placed < count {
                let pos = rng.random_range(0..a.cols());
                if x[pos].norm() == 0.0 {
                    x[pos] = Complex64::from_polar(
                        rng.random_range(1.0..=4.0),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    );
                    placed += 1;
                }
            }
            let clean = ComplexTensor3::new([a.rows(), 1, 1], a.apply(&x))?;
            let noisy = add_noise(&clean, snr_db, rng.random())?;
            data.echoes.push(noisy.into_data());
            data.truths.push(x);
        }
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.echoes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.echoes.is_empty()
    }

    /// First `n` pairs and the rest.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let n = n.min(self.len());
        (
            Self {
                echoes: self.echoes[..n].to_vec(),
                truths: self.truths[..n].to_vec(),
            },
            Self {
                echoes: self.echoes[n..].to_vec(),
                truths: self.truths[n..].to_vec(),
            },
        )
    }

    fn check(&self, a: &SteeringMatrix) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Config("dataset is empty".into()));
        }
        if self.echoes.len() != self.truths.len() {
            return Err(Error::Config("echo and truth counts differ".into()));
        }
        if self.echoes.iter().any(|e| e.len() != a.rows()) || self.truths.iter().any(|t| t.len() != a.cols()) {
            return Err(Error::Shape("dataset fibers do not match the steering matrix".into()));
        }
        Ok(())
    }
}

fn sq_err(x: &[Complex64], t: &[Complex64]) -> f64 {
    x.iter().zip(t).map(|(u, v)| (u - v).norm_sqr()).sum()
}

/// Mean over fibers of `||x_hat - x||^2`.
pub fn lista_loss(data: &FiberDataset, a: &SteeringMatrix, params: &LearnedIstaParams) -> Result<f64> {
    data.check(a)?;
    params.validate()?;
    Ok(loss_flat(data, a, &params.flat(), params.blocks))
}

fn loss_flat(data: &FiberDataset, a: &SteeringMatrix, p: &[f64], k: usize) -> f64 {
    let per: Vec<f64> = (0..data.len())
        .into_par_iter()
        .map(|i| sq_err(&run_blocks(a, &data.echoes[i], &p[..k], &p[k..]), &data.truths[i]))
        .collect();
    per.iter().sum::<f64>() / data.len() as f64
}

/// `sum ||x_hat - x||^2 / sum ||x||^2` for any fiber estimator.
pub fn normalized_mse(
    data: &FiberDataset,
    mut estimate: impl FnMut(&[Complex64]) -> Result<Vec<Complex64>>,
) -> Result<f64> {
    let (mut err, mut energy) = (0.0, 0.0);
    for (y, t) in data.echoes.iter().zip(&data.truths) {
        err += sq_err(&estimate(y)?, t);
        energy += t.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    if energy == 0.0 {
        return Err(Error::Precondition("dataset has no signal energy".into()));
    }
    Ok(err / energy)
}

/// Starting point for training: `alpha = 0.9 / ||A||^2` and the default
/// threshold `alpha * lambda1` averaged over the dataset.
pub fn lista_init(data: &FiberDataset, a: &SteeringMatrix, blocks: usize) -> Result<LearnedIstaParams> {
    data.check(a)?;
    let alpha = 0.9 / spectral_norm_sq(a, SPECTRAL_ITERS);
    let lambda1 = data
        .echoes
        .iter()
        .map(|y| SolverConfig::defaults_for_fiber(a, y).lambda1)
        .sum::<f64>()
        / data.len() as f64;
    LearnedIstaParams::ista_equivalent(blocks, alpha, lambda1)
}

/// Full-batch gradient descent on the `2K` block scalars.
///
/// Gradients are central finite differences. Each parameter moves by
/// `-lr * s^2 * g` with `s` its initial magnitude; a step that would
/// raise the loss is halved until it does not (up to 30 times), so the
/// loss trace never increases. Parameters are clamped to `>= 0`.
/// Returns the trained parameters and the loss before training and after
/// every epoch.
pub fn lista_train(
    data: &FiberDataset,
    a: &SteeringMatrix,
    init: &LearnedIstaParams,
    epochs: usize,
    lr: f64,
) -> Result<(LearnedIstaParams, Vec<f64>)> {
    data.check(a)?;
    init.validate()?;
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    let k = init.blocks;
    let mut p = init.flat();
    let scale: Vec<f64> = p.iter().map(|&v| if v > 0.0 { v } else { 1e-3 }).collect();
    let mut loss = loss_flat(data, a, &p, k);
    let mut trace = vec![loss];
    let mut step = lr;
    for _ in 0..epochs {
        let g = gradient(data, a, &p, k, &scale);
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<f64> = p
                .iter()
                .zip(&g)
                .zip(&scale)
                .map(|((v, gv), s)| (v - step * s * s * gv).max(0.0))
                .collect();
            let l = loss_flat(data, a, &cand, k);
            if l <= loss {
                p = cand;
                loss = l;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if accepted {
            step *= 1.25;
        }
        trace.push(loss);
    }
    Ok((LearnedIstaParams::from_flat(k, &p), trace))
}

/// Central-difference gradient of the mean loss. Each fiber reuses its
/// unperturbed trajectory up to the perturbed block.
fn gradient(data: &FiberDataset, a: &SteeringMatrix, p: &[f64], k: usize, scale: &[f64]) -> Vec<f64> {
    let per: Vec<Vec<f64>> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let (y, t) = (&data.echoes[i], &data.truths[i]);
            let mut states = Vec::with_capacity(k + 1);
            states.push(vec![Complex64::new(0.0, 0.0); a.cols()]);
            for b in 0..k {
                let next = ista_step(a, y, &states[b], p[b], p[k + b]);
                states.push(next);
            }
            let tail = |start: usize, al: f64, th: f64| {
                let mut x = ista_step(a, y, &states[start], al, th);
                for b in start + 1..k {
                    x = ista_step(a, y, &x, p[b], p[k + b]);
                }
                sq_err(&x, t)
            };
            (0..2 * k)
                .map(|j| {
                    let h = 1e-6 * scale[j];
                    let b = j % k;
                    let (al, th) = (p[b], p[k + b]);
                    let (plus, minus) = if j < k {
                        (tail(b, al + h, th), tail(b, al - h, th))
                    } else {
                        (tail(b, al, th + h), tail(b, al, th - h))
                    };
                    (plus - minus) / (2.0 * h)
                })
                .collect()
        })
        .collect();
    let mut g = vec![0.0; 2 * k];
    for row in &per {
        for (gv, v) in g.iter_mut().zip(row) {
            *gv += v;
        }
    }
    for gv in &mut g {
        *gv /= data.len() as f64;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::SystemGeometry;
    use crate::solvers::{ista_fiber, Variant};

    fn op() -> SteeringMatrix {
        SteeringMatrix::from_geometry(&SystemGeometry::reference(64).unwrap()).unwrap()
    }

    #[test]
    fn equivalence_params_reproduce_ista() {
        let a = op();
        let data = FiberDataset::synthetic(&a, 5, 5.0, 11).unwrap();
        for y in &data.echoes {
            let mut cfg = SolverConfig::defaults_for_fiber(&a, y);
            cfg.max_outer = 9;
            cfg.sigma = f64::MIN_POSITIVE;
            let (x, _) = ista_fiber(y, &a, &cfg, Variant::Ista).unwrap();
            let p = LearnedIstaParams::ista_equivalent(9, cfg.alpha, cfg.lambda1).unwrap();
            assert_eq!(lista_infer(y, &a, &p).unwrap(), x);
        }
    }

    #[test]
    fn tensor_blocks_match_fiber_inference() {
        let a = op();
        let data = FiberDataset::synthetic(&a, 6, 5.0, 4).unwrap();
        let mut flat = Vec::new();
        for m in 0..a.rows() {
            for e in &data.echoes {
                flat.push(e[m]);
            }
        }
        let y = ComplexTensor3::new([a.rows(), 2, 3], flat).unwrap();
        let p = LearnedIstaParams::new(vec![0.01, 0.02, 0.015], vec![0.02, 0.05, 0.0]).unwrap();
        let (x, rep) = lista_tensor(&y, &a, &p).unwrap();
        assert_eq!(rep.iterations, 3);
        for (f, e) in data.echoes.iter().enumerate() {
            assert_eq!(x.fiber_at(f), lista_infer(e, &a, &p).unwrap());
        }
    }

    #[test]
    fn zero_echo_gives_zero() {
        let a = op();
        let p = LearnedIstaParams::ista_equivalent(4, 0.01, 1.0).unwrap();
        let x = lista_infer(&vec![Complex64::new(0.0, 0.0); 12], &a, &p).unwrap();
        assert!(x.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let p = LearnedIstaParams::new(vec![0.1, 0.2], vec![0.0, 0.5]).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"blocks\":2"));
        assert_eq!(LearnedIstaParams::from_json(&text).unwrap(), p);
        assert!(LearnedIstaParams::new(vec![], vec![]).is_err());
        assert!(LearnedIstaParams::new(vec![0.1], vec![-1.0]).is_err());
        assert!(LearnedIstaParams::from_json(r#"{"blocks":2,"alpha":[1],"theta":[1,1]}"#).is_err());
    }

    #[test]
    fn empty_dataset_rejected() {
        let a = op();
        let p = LearnedIstaParams::ista_equivalent(2, 0.01, 1.0).unwrap();
        assert!(matches!(
            lista_train(&FiberDataset::default(), &a, &p, 1, 0.1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_epochs_keep_params_and_training_never_raises_loss() {
        let a = op();
        let data = FiberDataset::synthetic(&a, 20, 5.0, 2).unwrap();
        let init = lista_init(&data, &a, 3).unwrap();
        let (same, trace) = lista_train(&data, &a, &init, 0, 0.05).unwrap();
        assert_eq!(same, init);
        assert_eq!(trace.len(), 1);
        let (trained, trace) = lista_train(&data, &a, &init, 10, 0.05).unwrap();
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(trace[10] < trace[0]);
        trained.validate().unwrap();
    }

    #[test]
    fn finite_difference_gradient_matches_directional_change() {
        let a = op();
        let data = FiberDataset::synthetic(&a, 6, 10.0, 5).unwrap();
        let init = lista_init(&data, &a, 3).unwrap();
        let p = init.flat();
        let scale = p.clone();
        let g = gradient(&data, &a, &p, 3, &scale);
        let h = 1e-5;
        for j in 0..6 {
            let mut up = p.clone();
            up[j] += h * scale[j];
            let mut down = p.clone();
            down[j] -= h * scale[j];
            let fd = (loss_flat(&data, &a, &up, 3) - loss_flat(&data, &a, &down, 3)) / (2.0 * h * scale[j]);
            assert!((fd - g[j]).abs() <= 1e-3 * fd.abs().max(1.0), "{j}: {fd} vs {}", g[j]);
        }
    }
}
