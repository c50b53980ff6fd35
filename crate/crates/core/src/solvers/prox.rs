use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::ComplexTensor3;

/// Complex soft threshold `sign(z) * max(|z| - theta, 0)` with
/// `sign(z) = z / |z|` and `sign(0) = 0`.
pub fn soft_threshold(z: Complex64, theta: f64) -> Result<Complex64> {
    check_theta(theta)?;
    Ok(shrink(z, theta))
}

/// In-place soft threshold of every element.
pub fn soft_threshold_slice(z: &mut [Complex64], theta: f64) -> Result<()> {
    check_theta(theta)?;
    shrink_all(z, theta);
    Ok(())
}

pub fn soft_threshold_tensor(x: &ComplexTensor3, theta: f64) -> Result<ComplexTensor3> {
    check_theta(theta)?;
    Ok(x.map(|z| shrink(z, theta)))
}

fn check_theta(theta: f64) -> Result<()> {
    if theta >= 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("threshold must be nonnegative, got {theta}")))
    }
}

#[inline]
pub(crate) fn shrink(z: Complex64, theta: f64) -> Complex64 {
    let m = z.norm();
    if m > theta {
        z * ((m - theta) / m)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

pub(crate) fn shrink_all(z: &mut [Complex64], theta: f64) {
    for v in z {
        *v = shrink(*v, theta);
    }
}
