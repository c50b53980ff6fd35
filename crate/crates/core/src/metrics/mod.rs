//! Image accuracy, point-cloud structure and timing metrics.

mod nn;

pub use nn::NearestNeighbor;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{PointCloud, ScatterPoint};
use crate::tensor::ComplexTensor3;

/// Default extraction threshold relative to the peak magnitude.
pub const DEFAULT_REL_THRESHOLD: f64 = 0.1;
/// Default match radius: one voxel diagonal.
pub const DEFAULT_TAU_P: f64 = 1.732_050_807_568_877_2;

/// Root-mean-square difference of magnitudes.
pub fn rmse(xhat: &ComplexTensor3, x: &ComplexTensor3) -> Result<f64> {
    xhat.check_same(x)?;
    let sum: f64 = xhat
        .data()
        .iter()
        .zip(x.data())
        .map(|(u, v)| {
            let d = u.norm() - v.norm();
            d * d
        })
        .sum();
    Ok((sum / x.len() as f64).sqrt())
}

/// `20 log10(max / rmse)`; `+inf` when `rmse` is zero.
pub fn psnr_from(max: f64, rmse: f64) -> f64 {
    if rmse == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (max / rmse).log10()
    }
}

/// PSNR with the peak magnitude of the reference tensor `x`.
pub fn psnr(xhat: &ComplexTensor3, x: &ComplexTensor3) -> Result<f64> {
    Ok(psnr_from(x.max_abs(), rmse(xhat, x)?))
}

/// Voxels with magnitude at least `rel_threshold` times the peak become
/// points at their index coordinates `(x, y, z) = (range, azimuth,
/// elevation)` = `(j, k, i)`, carrying magnitude and phase. An all-zero
/// tensor yields an empty cloud.
pub fn extract_point_cloud(x: &ComplexTensor3, rel_threshold: f64) -> Result<PointCloud> {
    if !(rel_threshold > 0.0 && rel_threshold <= 1.0) {
        return Err(Error::Parameter(format!(
            "rel_threshold must lie in (0, 1], got {rel_threshold}"
        )));
    }
    let peak = x.max_abs();
    let mut points = Vec::new();
    if peak == 0.0 {
        return Ok(PointCloud::new(points));
    }
    let cut = rel_threshold * peak;
    let [d0, d1, d2] = x.dims();
    for i in 0..d0 {
        for j in 0..d1 {
            for k in 0..d2 {
                let v = x.data()[x.offset(i, j, k)];
                let m = v.norm();
                if m >= cut {
                    points.push(ScatterPoint {
                        x: j as f64,
                        y: k as f64,
                        z: i as f64,
                        amplitude: m,
                        phase: v.arg(),
                    });
                }
            }
        }
    }
    Ok(PointCloud::new(points))
}

/// Distance from every point of `from` to its nearest point in `to`, in
/// the order of `from`.
pub fn nearest_distances(from: &PointCloud, to: &PointCloud) -> Vec<f64> {
    let index = NearestNeighbor::new(&to.positions());
    let queries = from.positions();
    queries
        .par_iter()
        .map(|q| index.nearest_distance(q).unwrap_or(f64::INFINITY))
        .collect()
}

/// Counts behind precision and recall. The two true-positive counts are
/// kept apart: `t_p_precision` counts reconstructed points near a true
/// one, `t_p_recall` counts true points near a reconstructed one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `None` when the reconstruction is empty.
    pub precision: Option<f64>,
    /// `None` when the truth is empty.
    pub recall: Option<f64>,
    pub n_p: usize,
    pub a_p: usize,
    pub t_p_precision: usize,
    pub t_p_recall: usize,
}

pub fn precision_recall(recon: &PointCloud, truth: &PointCloud, tau_p: f64) -> Result<Matching> {
    if !(tau_p > 0.0) {
        return Err(Error::Parameter(format!("tau_p must be positive, got {tau_p}")));
    }
    let t_p_precision = nearest_distances(recon, truth).iter().filter(|&&d| d <= tau_p).count();
    let t_p_recall = nearest_distances(truth, recon).iter().filter(|&&d| d <= tau_p).count();
    let ratio = |t: usize, n: usize| (n > 0).then(|| t as f64 / n as f64);
    Ok(Matching {
        precision: ratio(t_p_precision, recon.len()),
        recall: ratio(t_p_recall, truth.len()),
        n_p: recon.len(),
        a_p: truth.len(),
        t_p_precision,
        t_p_recall,
    })
}

fn nonempty(recon: &PointCloud, truth: &PointCloud) -> Result<()> {
    if recon.is_empty() || truth.is_empty() {
        return Err(Error::Precondition(
            "point-cloud distance needs two nonempty clouds".into(),
        ));
    }
    Ok(())
}

/// Mean distance from reconstructed points to their nearest true point.
pub fn d_pcm(recon: &PointCloud, truth: &PointCloud) -> Result<f64> {
    nonempty(recon, truth)?;
    let d = nearest_distances(recon, truth);
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// Population variance of the same nearest distances.
pub fn variance(recon: &PointCloud, truth: &PointCloud) -> Result<f64> {
    nonempty(recon, truth)?;
    let d = nearest_distances(recon, truth);
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    Ok(d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d.len() as f64)
}

/// Runs `f` once and returns its value with the elapsed wall time in
/// seconds (monotonic clock).
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Runs `f` `runs` times; returns the last value, the mean time and the
/// individual timings.
pub fn timed_mean<T>(runs: usize, mut f: impl FnMut() -> T) -> Result<(T, f64, Vec<f64>)> {
    if runs == 0 {
        return Err(Error::Parameter("need at least one timed run".into()));
    }
    let mut times = Vec::with_capacity(runs);
    let mut last = None;
    for _ in 0..runs {
        let (v, t) = timed(&mut f);
        times.push(t);
        last = Some(v);
    }
    let mean = times.iter().sum::<f64>() / runs as f64;
    Ok((last.expect("runs >= 1"), mean, times))
}

/// Full evaluation of one reconstruction. Undefined values (infinite
/// PSNR, precision of an empty reconstruction, distances involving an
/// empty cloud) serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: f64,
    pub psnr_db: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub d_pcm: Option<f64>,
    pub variance: Option<f64>,
    pub reconstruction_time_s: f64,
    pub n_p: usize,
    pub a_p: usize,
    pub t_p_precision: usize,
    pub t_p_recall: usize,
    pub tau_p: f64,
}

/// Compares `recon` against `truth`: image metrics on the tensors, cloud
/// metrics on clouds extracted from both at `rel_threshold`.
pub fn evaluate(
    recon: &ComplexTensor3,
    truth: &ComplexTensor3,
    tau_p: f64,
    rel_threshold: f64,
    reconstruction_time_s: f64,
) -> Result<EvalReport> {
    let r = rmse(recon, truth)?;
    let p = psnr_from(truth.max_abs(), r);
    let rc = extract_point_cloud(recon, rel_threshold)?;
    let tc = extract_point_cloud(truth, rel_threshold)?;
    let m = precision_recall(&rc, &tc, tau_p)?;
    let both = !rc.is_empty() && !tc.is_empty();
    Ok(EvalReport {
        rmse: r,
        psnr_db: p.is_finite().then_some(p),
        precision: m.precision,
        recall: m.recall,
        d_pcm: if both { Some(d_pcm(&rc, &tc)?) } else { None },
        variance: if both { Some(variance(&rc, &tc)?) } else { None },
        reconstruction_time_s,
        n_p: m.n_p,
        a_p: m.a_p,
        t_p_precision: m.t_p_precision,
        t_p_recall: m.t_p_recall,
        tau_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(pts.iter().map(|p| ScatterPoint::at(p[0], p[1], p[2])).collect())
    }

    #[test]
    fn rmse_and_psnr_basics() {
        let x = ComplexTensor3::from_fn([2, 2, 2], |i, j, k| Complex64::new((i + j) as f64, k as f64)).unwrap();
        assert_eq!(rmse(&x, &x).unwrap(), 0.0);
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
        assert_eq!(psnr_from(1.0, 0.1), 20.0);
    }

    #[test]
    fn rmse_matches_hand_sum() {
        let a: Vec<Complex64> = (0..8).map(|n| Complex64::new(n as f64 * 0.3, 1.0 - n as f64)).collect();
        let b: Vec<Complex64> = (0..8).map(|n| Complex64::new((n * n) as f64 * 0.1, 0.5)).collect();
        let mut s = 0.0;
        for n in 0..8 {
            s += (a[n].norm() - b[n].norm()).powi(2);
        }
        let expected = (s / 8.0).sqrt();
        let ta = ComplexTensor3::new([2, 2, 2], a).unwrap();
        let tb = ComplexTensor3::new([2, 2, 2], b).unwrap();
        assert!((rmse(&ta, &tb).unwrap() - expected).abs() < 1e-12);
        assert_eq!(rmse(&ta, &tb).unwrap(), rmse(&tb, &ta).unwrap());
    }

    #[test]
    fn extraction_examples() {
        let mut x = ComplexTensor3::zeros([4, 4, 4]).unwrap();
        assert!(extract_point_cloud(&x, 0.1).unwrap().is_empty());
        let off = x.offset(1, 2, 3);
        x.data_mut()[off] = Complex64::new(0.0, 2.0);
        let c = extract_point_cloud(&x, 0.1).unwrap();
        assert_eq!(c.positions(), vec![[2.0, 3.0, 1.0]]);
        assert_eq!(c.points[0].amplitude, 2.0);
        for (n, &(i, j, k)) in [(0, 0, 0), (3, 3, 3), (2, 0, 1), (0, 3, 2)].iter().enumerate() {
            let off = x.offset(i, j, k);
            x.data_mut()[off] = Complex64::new(0.5 + n as f64 * 0.1, 0.0);
        }
        assert_eq!(extract_point_cloud(&x, 0.1).unwrap().len(), 5);
        assert_eq!(extract_point_cloud(&x, 1.0).unwrap().len(), 1);
        assert!(matches!(extract_point_cloud(&x, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn precision_recall_counting() {
        let truth = cloud(&[[0.0, 0.0, 0.0], [5.0, 0.0, 0.0], [0.0, 5.0, 0.0]]);
        let m = precision_recall(&truth, &truth, 0.5).unwrap();
        assert_eq!((m.precision, m.recall), (Some(1.0), Some(1.0)));
        let mut with_outlier = truth.clone();
        with_outlier.points.push(ScatterPoint::at(100.0, 100.0, 100.0));
        let m = precision_recall(&with_outlier, &truth, 0.5).unwrap();
        assert_eq!(m.precision, Some(3.0 / 4.0));
        assert_eq!(m.recall, Some(1.0));
        let m = precision_recall(&PointCloud::default(), &truth, 1.0).unwrap();
        assert_eq!((m.precision, m.recall), (None, Some(0.0)));
    }

    #[test]
    fn distance_examples() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[3.0, 0.0, 0.0]]);
        assert_eq!(d_pcm(&a, &b).unwrap(), 3.0);
        assert_eq!(variance(&a, &b).unwrap(), 0.0);
        assert_eq!(d_pcm(&a, &a).unwrap(), 0.0);
        assert!(matches!(d_pcm(&PointCloud::default(), &a), Err(Error::Precondition(_))));
    }

    #[test]
    fn timing() {
        let (v, t) = timed(|| 3);
        assert_eq!(v, 3);
        assert!(t >= 0.0);
        let (_, t) = timed(|| std::thread::sleep(std::time::Duration::from_millis(100)));
        assert!((t - 0.1).abs() < 0.05, "{t}");
        let (_, mean, times) = timed_mean(4, || (0..1000).sum::<u64>()).unwrap();
        assert_eq!(mean, times.iter().sum::<f64>() / 4.0);
    }

    #[test]
    fn evaluate_identical() {
        let x = ComplexTensor3::from_fn([4, 3, 3], |i, j, k| {
            if i == j + k {
                Complex64::new(1.0 + i as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .unwrap();
        let r = evaluate(&x, &x, DEFAULT_TAU_P, DEFAULT_REL_THRESHOLD, 0.5).unwrap();
        assert_eq!(r.rmse, 0.0);
        assert_eq!(r.psnr_db, None);
        assert_eq!((r.precision, r.recall, r.d_pcm), (Some(1.0), Some(1.0), Some(0.0)));
        let json = serde_json::to_value(&r).unwrap();
        let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
        assert!(keys.iter().any(|k| *k == "reconstruction_time_s"));
    }
}
