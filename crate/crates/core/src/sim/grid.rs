//! Projection of normalized point clouds into the slant-range / azimuth /
//! elevation voxel grid.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::forward::SystemGeometry;
use crate::tensor::ComplexTensor3;

/// Voxel grid of a scene tensor with dims `(n_z, n_x, n_y)`: elevation,
/// slant range, azimuth. Elevation cells are taken from the geometry's
/// elevation grid; range and azimuth cells are uniform and centred on the
/// scene reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_z: usize,
    pub n_x: usize,
    pub n_y: usize,
    /// Slant-range cell size, meters.
    pub cell_range: f64,
    /// Azimuth cell size, meters.
    pub cell_azimuth: f64,
    /// Physical length of one normalized unit, meters.
    pub scene_extent: f64,
    /// Offset of the grid centre from the scene reference point as
    /// (elevation, slant range, azimuth), meters.
    pub origin: [f64; 3],
}

impl GridSpec {
    /// Desk-scale default matching `SystemGeometry::reference(n_z)`.
    pub fn desk(n_z: usize, n_x: usize, n_y: usize) -> Self {
        Self {
            n_z,
            n_x,
            n_y,
            cell_range: 0.5,
            cell_azimuth: 0.5,
            scene_extent: 24.0 * (n_x.min(n_y) as f64 / 64.0),
            origin: [0.0; 3],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.n_z, self.n_x, self.n_y]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_z == 0 || self.n_x == 0 || self.n_y == 0 {
            return Err(Error::Config("grid extents must be positive".into()));
        }
        if [self.cell_range, self.cell_azimuth, self.scene_extent]
            .iter()
            .any(|&v| !(v > 0.0 && v.is_finite()))
        {
            return Err(Error::Config(
                "grid cell sizes and scene extent must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Round-trip slant-range phase `(-4 pi R / wavelength) mod 2 pi`.
pub fn slant_range_phase(range: f64, wavelength: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let p = (-4.0 * std::f64::consts::PI * range / wavelength).rem_euclid(two_pi);
    if p >= two_pi {
        0.0
    } else {
        p
    }
}

/// Slant range and elevation of a ground-frame point `(x, y, h)` (meters,
/// relative to the scene reference point) seen from the reference sensor
/// position. Elevation is measured perpendicular to the reference line of
/// sight, positive upward.
pub fn slant_coordinates(g: &SystemGeometry, x: f64, h: f64) -> (f64, f64) {
    let theta0 = g.reference_incidence_deg.to_radians();
    let r0 = g.reference_slant_range;
    let (sx, sh) = (-r0 * theta0.sin(), r0 * theta0.cos());
    let (dx, dh) = (x - sx, h - sh);
    let range = (dx * dx + dh * dh).sqrt();
    let theta = dx.atan2(-dh);
    (range, range * (theta - theta0).sin())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub scene: ComplexTensor3,
    /// Occupied voxels `(elevation, range, azimuth)` in point order.
    pub voxels: Vec<[usize; 3]>,
    /// Points that fell outside the grid.
    pub dropped: usize,
    /// Points discarded because their voxel was already taken.
    pub merged: usize,
}

/// Maps a normalized cloud into the scene tensor.
///
/// Normalized coordinates are scaled by `scene_extent` with `(0.5, 0.5, 0)`
/// on the scene reference point. Each voxel keeps the first point that
/// lands in it, with amplitude drawn uniformly from `[1, 4]` and the
/// round-trip slant-range phase.
pub fn project_to_grid(p: &PointCloud, g: &SystemGeometry, grid: &GridSpec, seed: u64) -> Result<Projection> {
    grid.validate()?;
    g.validate()?;
    if grid.n_z != g.n_z() {
        return Err(Error::Config(format!(
            "grid has {} elevation cells, geometry has {}",
            grid.n_z,
            g.n_z()
        )));
    }
    let mut scene = ComplexTensor3::zeros(grid.dims())?;
    let mut taken = vec![false; scene.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut voxels = Vec::new();
    let (mut dropped, mut merged) = (0, 0);
    let elev = &g.elevation_grid;
    let half_first = 0.5 * (elev[1] - elev[0]);
    let half_last = 0.5 * (elev[elev.len() - 1] - elev[elev.len() - 2]);

    for q in &p.points {
        let x = (q.x - 0.5) * grid.scene_extent;
        let y = (q.y - 0.5) * grid.scene_extent;
        let h = q.z * grid.scene_extent;
        let (range, s) = slant_coordinates(g, x, h);
        let s = s - grid.origin[0];
        let r = range - g.reference_slant_range - grid.origin[1];
        let az = y - grid.origin[2];

        if s < elev[0] - half_first || s > elev[elev.len() - 1] + half_last {
            dropped += 1;
            continue;
        }
        let iz = nearest(elev, s);
        let ix = (r / grid.cell_range).round() + (grid.n_x / 2) as f64;
        let iy = (az / grid.cell_azimuth).round() + (grid.n_y / 2) as f64;
        if ix < 0.0 || iy < 0.0 || ix >= grid.n_x as f64 || iy >= grid.n_y as f64 {
            dropped += 1;
            continue;
        }
        let (ix, iy) = (ix as usize, iy as usize);
        let off = scene.offset(iz, ix, iy);
        if taken[off] {
            merged += 1;
            continue;
        }
        taken[off] = true;
        let amplitude = rng.random_range(1.0..=4.0);
        let phase = slant_range_phase(range, g.wavelength);
        scene.data_mut()[off] = Complex64::from_polar(amplitude, phase);
        voxels.push([iz, ix, iy]);
    }
    Ok(Projection {
        scene,
        voxels,
        dropped,
        merged,
    })
}

fn nearest(sorted: &[f64], v: f64) -> usize {
    let idx = sorted.partition_point(|&e| e < v);
    if idx == 0 {
        0
    } else if idx == sorted.len() {
        sorted.len() - 1
    } else if v - sorted[idx - 1] <= sorted[idx] - v {
        idx - 1
    } else {
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::cloud::ScatterPoint;

    fn setup() -> (SystemGeometry, GridSpec) {
        (SystemGeometry::reference(64).unwrap(), GridSpec::desk(64, 64, 64))
    }

    #[test]
    fn reference_point_lands_on_grid_centre() {
        let (g, grid) = setup();
        let (range, s) = slant_coordinates(&g, 0.0, 0.0);
        assert!((range - g.reference_slant_range).abs() < 1e-9);
        assert!(s.abs() < 1e-9);
        let cloud = PointCloud::new(vec![ScatterPoint::at(0.5, 0.5, 0.0)]);
        let proj = project_to_grid(&cloud, &g, &grid, 0).unwrap();
        assert_eq!(proj.voxels, vec![[32, 32, 32]]);
        let v = proj.scene.get(32, 32, 32).unwrap();
        assert!((1.0..=4.0).contains(&v.norm()));
        let expected_phase = slant_range_phase(g.reference_slant_range, g.wavelength);
        assert!((v.arg().rem_euclid(2.0 * std::f64::consts::PI) - expected_phase).abs() < 1e-9);
    }

    #[test]
    fn colliding_points_keep_one_voxel() {
        let (g, grid) = setup();
        let cloud = PointCloud::new(vec![
            ScatterPoint::at(0.5, 0.5, 0.0),
            ScatterPoint::at(0.5001, 0.5, 0.0),
        ]);
        let proj = project_to_grid(&cloud, &g, &grid, 0).unwrap();
        assert_eq!(proj.voxels.len(), 1);
        assert_eq!(proj.merged, 1);
        assert_eq!(proj.scene.data().iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn half_wavelength_range_shift_keeps_phase() {
        let r0 = 2040.3406;
        let lambda = 0.031;
        let a = slant_range_phase(r0, lambda);
        let b = slant_range_phase(r0 + lambda / 2.0, lambda);
        let diff = (a - b).abs();
        assert!(diff < 1e-6 || (2.0 * std::f64::consts::PI - diff) < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn out_of_grid_points_are_counted() {
        let (g, mut grid) = setup();
        grid.scene_extent = 500.0;
        let cloud = PointCloud::new(vec![ScatterPoint::at(0.5, 0.5, 0.0), ScatterPoint::at(1.0, 1.0, 1.0)]);
        let proj = project_to_grid(&cloud, &g, &grid, 0).unwrap();
        assert_eq!(proj.dropped, 1);
        assert_eq!(proj.voxels.len(), 1);
    }

    #[test]
    fn higher_points_sit_higher_in_elevation() {
        let (g, _) = setup();
        let (_, s0) = slant_coordinates(&g, 0.0, 0.0);
        let (r1, s1) = slant_coordinates(&g, 0.0, 5.0);
        assert!(s1 > s0);
        // and closer in range (layover)
        assert!(r1 < g.reference_slant_range);
    }

    #[test]
    fn mismatched_elevation_count_rejected() {
        let (g, _) = setup();
        let grid = GridSpec::desk(32, 16, 16);
        assert!(matches!(
            project_to_grid(&PointCloud::default(), &g, &grid, 0),
            Err(Error::Config(_))
        ));
    }
}
