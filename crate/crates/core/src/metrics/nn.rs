//! Grid-bucketed exact nearest-neighbor search in 3D.

use std::collections::HashMap;

#[inline]
pub(crate) fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Uniform bucket grid over a fixed point set. Queries return exactly the
/// brute-force minimum distance: candidate distances use the same
/// expression and the search only stops once no unvisited bucket can
/// hold a closer point.
#[derive(Debug, Clone)]
pub struct NearestNeighbor {
    points: Vec<[f64; 3]>,
    origin: [f64; 3],
    cell: f64,
    extent: [i64; 3],
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

impl NearestNeighbor {
    pub fn new(points: &[[f64; 3]]) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for d in 0..3 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let span = (0..3).map(|d| (hi[d] - lo[d]).max(0.0)).fold(0.0, f64::max);
        let per_axis = (points.len() as f64).cbrt().max(1.0);
        let cell = if span > 0.0 { span / per_axis } else { 1.0 };
        let origin = if points.is_empty() { [0.0; 3] } else { lo };
        let mut nn = Self {
            points: points.to_vec(),
            origin,
            cell,
            extent: [1; 3],
            buckets: HashMap::new(),
        };
        for d in 0..3 {
            if !points.is_empty() {
                nn.extent[d] = ((hi[d] - lo[d]) / cell).floor() as i64 + 1;
            }
        }
        for (i, p) in points.iter().enumerate() {
            let key = nn.key(p);
            nn.buckets.entry(key).or_default().push(i);
        }
        nn
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn key(&self, p: &[f64; 3]) -> [i64; 3] {
        let mut k = [0i64; 3];
        for d in 0..3 {
            let c = ((p[d] - self.origin[d]) / self.cell).floor();
            k[d] = if c.is_nan() {
                0
            } else {
                (c as i64).clamp(0, self.extent[d] - 1)
            };
        }
        k
    }

    /// Distance to the closest indexed point, `None` for an empty index.
    pub fn nearest_distance(&self, q: &[f64; 3]) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let centre = self.key(q);
        let max_ring = self.extent.iter().copied().max().unwrap_or(1);
        let mut best = f64::INFINITY;
        for r in 0..=max_ring {
            self.visit_shell(centre, r, |i| {
                let d = distance(q, &self.points[i]);
                if d < best {
                    best = d;
                }
            });
            // every bucket at ring r + 1 or beyond lies at least r cells away
            if best < r as f64 * self.cell * (1.0 - 1e-9) {
                break;
            }
        }
        Some(best)
    }

    fn visit_shell(&self, c: [i64; 3], r: i64, mut f: impl FnMut(usize)) {
        let range = |d: usize| (c[d] - r).max(0)..=(c[d] + r).min(self.extent[d] - 1);
        for x in range(0) {
            for y in range(1) {
                for z in range(2) {
                    let ring = (x - c[0]).abs().max((y - c[1]).abs()).max((z - c[2]).abs());
                    if ring != r {
                        continue;
                    }
                    if let Some(ids) = self.buckets.get(&[x, y, z]) {
                        ids.iter().for_each(|&i| f(i));
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(q: &[f64; 3], pts: &[[f64; 3]]) -> f64 {
        pts.iter().map(|p| distance(q, p)).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn matches_brute_force_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..20 {
            let n = rng.random_range(1..300);
            let pts: Vec<[f64; 3]> = (0..n)
                .map(|_| {
                    [
                        rng.random_range(0.0..10.0),
                        rng.random_range(0.0..3.0),
                        rng.random_range(-5.0..5.0),
                    ]
                })
                .collect();
            let nn = NearestNeighbor::new(&pts);
            for _ in 0..100 {
                let q = [
                    rng.random_range(-3.0..13.0),
                    rng.random_range(-3.0..6.0),
                    rng.random_range(-8.0..8.0),
                ];
                assert_eq!(nn.nearest_distance(&q).unwrap(), brute(&q, &pts), "trial {trial}");
            }
        }
    }

    #[test]
    fn degenerate_sets() {
        assert_eq!(NearestNeighbor::new(&[]).nearest_distance(&[0.0; 3]), None);
        let one = NearestNeighbor::new(&[[1.0, 2.0, 3.0]]);
        assert_eq!(one.nearest_distance(&[1.0, 2.0, 0.0]), Some(3.0));
        let same = NearestNeighbor::new(&[[1.0; 3], [1.0; 3]]);
        assert_eq!(same.nearest_distance(&[1.0; 3]), Some(0.0));
    }
}
