use num_complex::Complex64;

use crate::error::Result;
use crate::forward::SteeringMatrix;
use crate::tensor::{tv_norm, ComplexTensor3};

/// `0.5 ||Y - A(X)||_F^2 + lambda1 ||X||_1 + lambda2 TV(X)`.
pub fn objective_eval(
    x: &ComplexTensor3,
    y: &ComplexTensor3,
    a: &SteeringMatrix,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    let residual = y.sub(&a.forward(x)?)?;
    let mut value = 0.5 * residual.norm_sqr() + lambda1 * x.l1();
    if lambda2 != 0.0 {
        value += lambda2 * tv_norm(x);
    }
    Ok(value)
}

/// Single-fiber objective `0.5 ||y - A x||^2 + lambda1 ||x||_1`.
pub(crate) fn fiber_objective(a: &SteeringMatrix, y: &[Complex64], x: &[Complex64], lambda1: f64) -> f64 {
    let ax = a.apply(x);
    let data: f64 = y.iter().zip(&ax).map(|(u, v)| (u - v).norm_sqr()).sum();
    0.5 * data + lambda1 * x.iter().map(|z| z.norm()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::SystemGeometry;
    use crate::tensor::{Axis, DiffOperator};

    fn setup() -> (SteeringMatrix, ComplexTensor3, ComplexTensor3) {
        let g = SystemGeometry::uniform(4, 6).unwrap();
        let a = SteeringMatrix::from_geometry(&g).unwrap();
        let x = ComplexTensor3::from_fn([6, 2, 3], |i, j, k| {
            Complex64::new((i as f64 * 0.3 - j as f64).sin(), (k as f64 + 0.2 * i as f64).cos())
        })
        .unwrap();
        let y =
            ComplexTensor3::from_fn([4, 2, 3], |i, j, k| Complex64::new(i as f64 - k as f64, 0.5 * j as f64)).unwrap();
        (a, x, y)
    }

    #[test]
    fn zero_scene_gives_half_energy() {
        let (a, x, y) = setup();
        let z = ComplexTensor3::zeros(x.dims()).unwrap();
        let v = objective_eval(&z, &y, &a, 0.7, 0.3).unwrap();
        assert!((v - 0.5 * y.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn exact_solution_without_regularization_is_zero() {
        let (a, x, _) = setup();
        let y = a.forward(&x).unwrap();
        assert_eq!(objective_eval(&x, &y, &a, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn matches_scalar_summation() {
        let (a, x, y) = setup();
        let [d0, d1, d2] = x.dims();
        let mut data = 0.0;
        for j in 0..d1 {
            for k in 0..d2 {
                for m in 0..a.rows() {
                    let mut s = Complex64::new(0.0, 0.0);
                    for n in 0..d0 {
                        s += a.entry(m, n) * x.get(n, j, k).unwrap();
                    }
                    data += (y.get(m, j, k).unwrap() - s).norm_sqr();
                }
            }
        }
        let l1: f64 = x.data().iter().map(|z| z.norm()).sum();
        let mut tv = 0.0;
        for i in 0..d0 {
            for j in 0..d1 {
                for k in 0..d2 {
                    let v = x.get(i, j, k).unwrap();
                    if i + 1 < d0 {
                        tv += (x.get(i + 1, j, k).unwrap() - v).norm();
                    }
                    if j + 1 < d1 {
                        tv += (x.get(i, j + 1, k).unwrap() - v).norm();
                    }
                    if k + 1 < d2 {
                        tv += (x.get(i, j, k + 1).unwrap() - v).norm();
                    }
                }
            }
        }
        let expected = 0.5 * data + 0.4 * l1 + 0.25 * tv;
        let got = objective_eval(&x, &y, &a, 0.4, 0.25).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-12, "{got} vs {expected}");
        // the tv term agrees with the operator form
        let op: f64 = Axis::ALL.iter().map(|&ax| DiffOperator::new(ax).apply(&x).l1()).sum();
        assert!((op - tv).abs() < 1e-12);
    }
}
