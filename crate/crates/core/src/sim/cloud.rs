use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub amplitude: f64,
    /// Radians in `[0, 2pi)`.
    pub phase: f64,
}

impl ScatterPoint {
    pub fn at(x: f64, y: f64, z: f64) -> Self {
        Self {
            x,
            y,
            z,
            amplitude: 1.0,
            phase: 0.0,
        }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<ScatterPoint>,
}

impl PointCloud {
    pub fn new(points: Vec<ScatterPoint>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(ScatterPoint::position).collect()
    }

    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.points {
            for (a, v) in p.position().into_iter().enumerate() {
                lo[a] = lo[a].min(v);
                hi[a] = hi[a].max(v);
            }
        }
        (lo, hi)
    }
}

/// Shifts every axis so its minimum is zero, then divides all three axes by
/// the single largest shifted maximum. Aspect ratios are preserved.
pub fn normalize(p: &PointCloud) -> Result<PointCloud> {
    if p.is_empty() {
        return Err(Error::Precondition("cannot normalize an empty point cloud".into()));
    }
    let (lo, hi) = p.bounds();
    let span = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    let scale = if span > 0.0 { 1.0 / span } else { 1.0 };
    let points = p
        .points
        .iter()
        .map(|q| ScatterPoint {
            x: (q.x - lo[0]) * scale,
            y: (q.y - lo[1]) * scale,
            z: (q.z - lo[2]) * scale,
            ..*q
        })
        .collect();
    Ok(PointCloud { points })
}

/// Random isotropic rescale followed by a per-axis translation, clamped to
/// the unit cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Augmentation {
    pub scale_range: (f64, f64),
    pub translate_range: [(f64, f64); 3],
}

impl Augmentation {
    pub fn identity() -> Self {
        Self {
            scale_range: (1.0, 1.0),
            translate_range: [(0.0, 0.0); 3],
        }
    }
}

impl Default for Augmentation {
    fn default() -> Self {
        Self {
            scale_range: (0.7, 1.0),
            translate_range: [(0.0, 0.2), (0.0, 0.2), (0.0, 0.0)],
        }
    }
}

pub fn augment(p: &PointCloud, aug: &Augmentation, seed: u64) -> Result<PointCloud> {
    let (lo, hi) = aug.scale_range;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::Config(format!(
            "scale range ({lo}, {hi}) must satisfy 0 < lo <= hi"
        )));
    }
    if aug
        .translate_range
        .iter()
        .any(|&(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite())
    {
        return Err(Error::Config("translation ranges must be finite with lo <= hi".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = if lo == hi { lo } else { rng.random_range(lo..=hi) };
    let mut shift = [0.0; 3];
    for (s, &(a, b)) in shift.iter_mut().zip(&aug.translate_range) {
        *s = if a == b { a } else { rng.random_range(a..=b) };
    }
    let moved: Vec<[f64; 3]> = p
        .points
        .iter()
        .map(|q| [scale * q.x + shift[0], scale * q.y + shift[1], scale * q.z + shift[2]])
        .collect();
    let inside = |v: &[f64; 3]| v.iter().all(|c| (0.0..=1.0).contains(c));
    if !p.is_empty() && !moved.iter().any(inside) {
        return Err(Error::Config(format!(
            "scale {scale} and shift {shift:?} move every point outside the unit cube"
        )));
    }
    let points = p
        .points
        .iter()
        .zip(moved)
        .map(|(q, v)| ScatterPoint {
            x: v[0].clamp(0.0, 1.0),
            y: v[1].clamp(0.0, 1.0),
            z: v[2].clamp(0.0, 1.0),
            ..*q
        })
        .collect();
    Ok(PointCloud { points })
}
