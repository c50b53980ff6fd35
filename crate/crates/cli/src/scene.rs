use tomosar::forward::{SteeringMatrix, SystemGeometry};
use tomosar::sim::{generate_echo, make_test_object, Augmentation, GridSpec, ObjectMetadata, ObjectParams, TestObject};
use tomosar::{ComplexTensor3, Result};

/// Noise stream seed paired with an object seed.
pub fn noise_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Desk-scale object parameters on `geometry` with an `n_x x n_y` ground
/// grid.
pub fn object_params(geometry: &SystemGeometry, n_x: usize, n_y: usize, seed: u64) -> ObjectParams {
    ObjectParams {
        geometry: geometry.clone(),
        grid: GridSpec::desk(geometry.n_z(), n_x, n_y),
        seed,
        spacing: 0.25,
        augmentation: Augmentation::identity(),
    }
}

/// Ground-truth scene, noisy echo and metadata. `snr_db = +inf` gives a
/// noiseless echo.
pub fn simulate_scene(
    object: TestObject,
    params: &ObjectParams,
    snr_db: f64,
) -> Result<(ComplexTensor3, ComplexTensor3, ObjectMetadata)> {
    let (scene, meta) = make_test_object(object, params)?;
    let a = SteeringMatrix::from_geometry(&params.geometry)?;
    let echo = generate_echo(&scene, &a, snr_db, noise_seed(params.seed))?;
    Ok((scene, echo, meta))
}
