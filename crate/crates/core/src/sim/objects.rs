//! Canonical test scenes: a two-scatterer fiber, voxel-space step
//! profiles, and full simulated buildings.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::building::{generate_building, BuildingKind, BuildingModel};
use super::cloud::{augment, normalize, Augmentation};
use super::grid::{project_to_grid, GridSpec};
use crate::error::{Error, Result};
use crate::forward::{add_noise, theoretical_resolution, SteeringMatrix, SystemGeometry};
use crate::tensor::ComplexTensor3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestObject {
    /// Two unit scatterers in one fiber, `separation` in multiples of the
    /// matched-filter resolution.
    TwoScatterers {
        separation: f64,
    },
    OneStep,
    MultiStep,
    Building(BuildingKind),
}

impl TestObject {
    /// Parses `one_step`, `multi_step`, `building:<kind>` and
    /// `two_scatterers:<separation>`.
    pub fn parse(spec: &str) -> Result<Self> {
        match spec {
            "one_step" => Ok(TestObject::OneStep),
            "multi_step" => Ok(TestObject::MultiStep),
            _ => {
                if let Some(kind) = spec.strip_prefix("building:") {
                    BuildingKind::parse(kind)
                        .map(TestObject::Building)
                        .ok_or_else(|| Error::Config(format!("unknown building kind '{kind}'")))
                } else if let Some(sep) = spec.strip_prefix("two_scatterers:") {
                    let separation = sep
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad separation '{sep}'")))?;
                    Ok(TestObject::TwoScatterers { separation })
                } else {
                    Err(Error::Config(format!("unknown test object '{spec}'")))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            TestObject::TwoScatterers { separation } => format!("two_scatterers:{separation}"),
            TestObject::OneStep => "one_step".into(),
            TestObject::MultiStep => "multi_step".into(),
            TestObject::Building(k) => format!("building:{}", k.name()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObjectParams {
    pub geometry: SystemGeometry,
    pub grid: GridSpec,
    pub seed: u64,
    /// Surface sampling spacing for buildings, meters.
    pub spacing: f64,
    pub augmentation: Augmentation,
}

impl ObjectParams {
    pub fn desk(seed: u64) -> Result<Self> {
        Ok(Self {
            geometry: SystemGeometry::reference(64)?,
            grid: GridSpec::desk(64, 64, 64),
            seed,
            spacing: 0.25,
            augmentation: Augmentation::identity(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMetadata {
    pub kind: String,
    pub seed: u64,
    pub dims: [usize; 3],
    /// Occupied voxels as (elevation, range, azimuth).
    pub scatterers: Vec<[usize; 3]>,
    /// Elevation gap between the two scatterers, cells.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation_cells: Option<usize>,
    pub rho_s_m: Option<f64>,
}

pub fn make_test_object(obj: TestObject, params: &ObjectParams) -> Result<(ComplexTensor3, ObjectMetadata)> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let rho = theoretical_resolution(&params.geometry).ok();
    let mut meta = ObjectMetadata {
        kind: obj.name(),
        seed: params.seed,
        dims: [0; 3],
        scatterers: Vec::new(),
        separation_cells: None,
        rho_s_m: rho,
    };
    let scene = match obj {
        TestObject::TwoScatterers { separation } => {
            if !(separation >= 0.0 && separation.is_finite()) {
                return Err(Error::Config(format!("separation must be >= 0, got {separation}")));
            }
            let rho = rho.ok_or_else(|| Error::Config("geometry has no baseline aperture".into()))?;
            let n_z = params.geometry.n_z();
            let gap = separation_cells(separation, rho, params.geometry.elevation_cell());
            let first = (n_z / 2).checked_sub(gap / 2).unwrap_or(0);
            if first + gap >= n_z {
                return Err(Error::Config(format!(
                    "separation of {gap} cells does not fit {n_z} cells"
                )));
            }
            let mut scene = ComplexTensor3::zeros([n_z, 1, 1])?;
            let positions = if gap == 0 {
                vec![first]
            } else {
                vec![first, first + gap]
            };
            for &pos in &positions {
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                scene.data_mut()[pos] = Complex64::from_polar(1.0, phase);
                meta.scatterers.push([pos, 0, 0]);
            }
            meta.separation_cells = Some(gap);
            scene
        }
        TestObject::OneStep | TestObject::MultiStep => {
            let steps = if obj == TestObject::OneStep { 1 } else { 3 };
            let profile = step_profile(params.grid.n_z, params.grid.n_x, steps)?;
            let [n_z, n_x, n_y] = params.grid.dims();
            let (lo, hi) = (n_y / 4, (3 * n_y / 4).max(n_y / 4 + 1));
            let mut scene = ComplexTensor3::zeros([n_z, n_x, n_y])?;
            for k in lo..hi {
                for &(e, r) in &profile {
                    let amp = rng.random_range(1.0..=4.0);
                    let phase = rng.random_range(0.0..std::f64::consts::TAU);
                    let off = scene.offset(e, r, k);
                    scene.data_mut()[off] = Complex64::from_polar(amp, phase);
                    meta.scatterers.push([e, r, k]);
                }
            }
            scene
        }
        TestObject::Building(kind) => {
            let model = BuildingModel::with_kind(kind, params.geometry.reference_incidence_deg);
            let cloud = generate_building(&model, params.spacing, params.seed)?;
            let cloud = normalize(&cloud)?;
            let cloud = augment(&cloud, &params.augmentation, params.seed.wrapping_add(1))?;
            let proj = project_to_grid(&cloud, &params.geometry, &params.grid, params.seed.wrapping_add(2))?;
            meta.scatterers = proj.voxels;
            proj.scene
        }
    };
    meta.dims = scene.dims();
    Ok((scene, meta))
}

/// Elevation gap in cells for a separation given in resolution units.
pub fn separation_cells(separation: f64, rho_s: f64, cell: f64) -> usize {
    (separation * rho_s / cell).round() as usize
}

/// Frontal-slice staircase as `(elevation, range)` cells: a floor, then
/// `steps` repetitions of facade and roof, all axis aligned. Adjacent
/// segments share their corner cell.
pub fn step_profile(n_z: usize, n_x: usize, steps: usize) -> Result<Vec<(usize, usize)>> {
    if steps == 0 || n_z < 4 * steps + 4 || n_x < 4 * (steps + 1) {
        return Err(Error::Config(format!("grid {n_z}x{n_x} too small for {steps} steps")));
    }
    // facade rise and tread length
    let rise = (n_z / (4 * steps + 4)).max(2);
    let tread = n_x * 3 / (4 * (steps + 1));
    let base = n_z / 2 - rise * steps / 2;
    let mut cells = Vec::new();
    let mut r = n_x / 8;
    let mut e = base;
    for c in r..=r + tread {
        cells.push((e, c));
    }
    r += tread;
    for _ in 0..steps {
        for ee in e + 1..=e + rise {
            cells.push((ee, r));
        }
        e += rise;
        for c in r + 1..=r + tread {
            cells.push((e, c));
        }
        r += tread;
    }
    Ok(cells)
}

/// Noisy echo `forward(x) + n` for a ground-truth scene.
pub fn generate_echo(x: &ComplexTensor3, a: &SteeringMatrix, snr_db: f64, seed: u64) -> Result<ComplexTensor3> {
    let clean = a.forward(x)?;
    if snr_db == f64::INFINITY {
        return Ok(clean);
    }
    add_noise(&clean, snr_db, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coincident_scatterers_occupy_one_voxel() {
        let p = ObjectParams::desk(1).unwrap();
        let (scene, meta) = make_test_object(TestObject::TwoScatterers { separation: 0.0 }, &p).unwrap();
        assert_eq!(scene.data().iter().filter(|z| z.norm() > 0.0).count(), 1);
        assert_eq!(meta.scatterers.len(), 1);
    }

    #[test]
    fn unit_separation_gap_matches_grid_arithmetic() {
        let p = ObjectParams::desk(1).unwrap();
        let rho = theoretical_resolution(&p.geometry).unwrap();
        let cell = p.geometry.elevation_cell();
        let (scene, meta) = make_test_object(TestObject::TwoScatterers { separation: 1.0 }, &p).unwrap();
        let occupied: Vec<usize> = (0..scene.len()).filter(|&i| scene.data()[i].norm() > 0.0).collect();
        assert_eq!(occupied.len(), 2);
        assert_eq!(occupied[1] - occupied[0], (rho / cell).round() as usize);
        assert_eq!(meta.separation_cells, Some(6));
        for z in scene.data().iter().filter(|z| z.norm() > 0.0) {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_separation_rejected() {
        let p = ObjectParams::desk(1).unwrap();
        assert!(matches!(
            make_test_object(TestObject::TwoScatterers { separation: -0.1 }, &p),
            Err(Error::Config(_))
        ));
    }

    /// Maximal straight runs of length >= 2 along each axis of a slice mask.
    fn runs(mask: &[Vec<bool>]) -> (Vec<Vec<(usize, usize)>>, Vec<Vec<(usize, usize)>>) {
        let (rows, cols) = (mask.len(), mask[0].len());
        let mut horizontal = Vec::new();
        for e in 0..rows {
            let mut c = 0;
            while c < cols {
                if mask[e][c] {
                    let start = c;
                    while c < cols && mask[e][c] {
                        c += 1;
                    }
                    if c - start >= 2 {
                        horizontal.push((start..c).map(|cc| (e, cc)).collect());
                    }
                } else {
                    c += 1;
                }
            }
        }
        let mut vertical = Vec::new();
        for c in 0..cols {
            let mut e = 0;
            while e < rows {
                if mask[e][c] {
                    let start = e;
                    while e < rows && mask[e][c] {
                        e += 1;
                    }
                    if e - start >= 2 {
                        vertical.push((start..e).map(|ee| (ee, c)).collect());
                    }
                } else {
                    e += 1;
                }
            }
        }
        (horizontal, vertical)
    }

    fn segments_and_corners(obj: TestObject) -> (usize, usize) {
        let p = ObjectParams::desk(3).unwrap();
        let (scene, _) = make_test_object(obj, &p).unwrap();
        let slice = scene.slice(crate::tensor::Axis::Frontal, 32).unwrap();
        let mask: Vec<Vec<bool>> = (0..slice.nrows())
            .map(|e| (0..slice.ncols()).map(|r| slice[(e, r)].norm() > 0.0).collect())
            .collect();
        let (h, v) = runs(&mask);
        let hset: std::collections::HashSet<_> = h.iter().flatten().cloned().collect();
        let corners = v.iter().flatten().filter(|c| hset.contains(c)).count();
        // every occupied cell is covered by some run
        let total = mask.iter().flatten().filter(|&&b| b).count();
        let covered: std::collections::HashSet<_> = h.iter().chain(&v).flatten().cloned().collect();
        assert_eq!(covered.len(), total);
        (h.len() + v.len(), corners)
    }

    #[test]
    fn one_step_has_three_segments_two_corners() {
        assert_eq!(segments_and_corners(TestObject::OneStep), (3, 2));
    }

    #[test]
    fn multi_step_has_seven_segments_six_corners() {
        assert_eq!(segments_and_corners(TestObject::MultiStep), (7, 6));
    }

    #[test]
    fn built_in_models_are_sparse_with_valid_amplitudes() {
        let p = ObjectParams::desk(5).unwrap();
        let mut objects = vec![TestObject::OneStep, TestObject::MultiStep];
        objects.extend(BuildingKind::ALL.into_iter().map(TestObject::Building));
        for obj in objects {
            let (scene, meta) = make_test_object(obj, &p).unwrap();
            let occupied = scene.data().iter().filter(|z| z.norm() > 0.0).count();
            let fraction = occupied as f64 / scene.len() as f64;
            assert!(occupied > 100, "{obj:?} has only {occupied} voxels");
            assert!(fraction <= 0.05, "{obj:?} occupancy {fraction}");
            assert_eq!(occupied, meta.scatterers.len());
            for z in scene.data().iter().filter(|z| z.norm() > 0.0) {
                assert!(z.norm() >= 1.0 - 1e-12 && z.norm() <= 4.0 + 1e-12);
            }
        }
    }

    #[test]
    fn building_pipeline_is_deterministic() {
        let p = ObjectParams::desk(8).unwrap();
        let a = make_test_object(TestObject::Building(BuildingKind::LShape), &p).unwrap();
        let b = make_test_object(TestObject::Building(BuildingKind::LShape), &p).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn parse_object_names() {
        assert_eq!(TestObject::parse("one_step").unwrap(), TestObject::OneStep);
        assert_eq!(
            TestObject::parse("building:box").unwrap(),
            TestObject::Building(BuildingKind::Box)
        );
        assert!(TestObject::parse("building:igloo").is_err());
        assert!(TestObject::parse("tower").is_err());
    }

    #[test]
    fn echo_of_zero_scene_without_noise_is_zero() {
        let g = SystemGeometry::reference(16).unwrap();
        let a = SteeringMatrix::from_geometry(&g).unwrap();
        let y = generate_echo(&ComplexTensor3::zeros([16, 2, 2]).unwrap(), &a, f64::INFINITY, 0).unwrap();
        assert!(y.data().iter().all(|z| z.norm() == 0.0));
    }
}
