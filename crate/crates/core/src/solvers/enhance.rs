//! TV-denoising enhancement `argmin_U 0.5 ||U - X||_F^2 + lambda2 TV(U)`.

use super::prox::shrink;
use crate::error::{Error, Result};
use crate::tensor::{Axis, ComplexTensor3, DiffOperator};

/// Bregman penalty of the enhancement stage.
const ENHANCE_MU: f64 = 2.0;
/// Conjugate-gradient sweeps per Bregman iteration for the `U` update.
const CG_ITERS: usize = 6;

/// Split-Bregman solution of the anisotropic TV proximal problem with
/// `iters` outer iterations. `lambda2 = 0` returns `x` unchanged.
pub fn tv_denoise_enhance(x: &ComplexTensor3, lambda2: f64, iters: usize) -> Result<ComplexTensor3> {
    if !(lambda2 >= 0.0 && lambda2.is_finite()) {
        return Err(Error::Parameter(format!("lambda2 must be nonnegative, got {lambda2}")));
    }
    if lambda2 == 0.0 || iters == 0 {
        return Ok(x.clone());
    }
    let ops = Axis::ALL.map(DiffOperator::new);
    let zeros = ComplexTensor3::zeros(x.dims())?;
    let mut u = x.clone();
    let mut v = [zeros.clone(), zeros.clone(), zeros.clone()];
    let mut b = v.clone();
    let threshold = lambda2 / ENHANCE_MU;
    for _ in 0..iters {
        // (I + mu sum D_i^T D_i) U = X + mu sum D_i^T (V_i - B_i)
        let mut rhs = x.clone();
        for ((d, vi), bi) in ops.iter().zip(&v).zip(&b) {
            let t = d.apply_adjoint(&vi.sub(bi)?);
            axpy(&mut rhs, ENHANCE_MU, &t);
        }
        conjugate_gradient(&mut u, &rhs, &ops);

        for ((d, vi), bi) in ops.iter().zip(v.iter_mut()).zip(b.iter_mut()) {
            let du = d.apply(&u);
            *vi = du.zip_map(bi, |p, q| shrink(p + q, threshold))?;
            *bi = bi.zip_map(&du, |q, p| q + p)?.sub(vi)?;
        }
    }
    Ok(u)
}

fn axpy(y: &mut ComplexTensor3, a: f64, x: &ComplexTensor3) {
    for (u, v) in y.data_mut().iter_mut().zip(x.data()) {
        *u += v * a;
    }
}

fn normal_op(u: &ComplexTensor3, ops: &[DiffOperator; 3]) -> ComplexTensor3 {
    let mut out = u.clone();
    for d in ops {
        axpy(&mut out, ENHANCE_MU, &d.apply_adjoint(&d.apply(u)));
    }
    out
}

fn dot(a: &ComplexTensor3, b: &ComplexTensor3) -> f64 {
    a.data().iter().zip(b.data()).map(|(u, v)| (u.conj() * v).re).sum()
}

/// Warm-started CG on the real-symmetric positive definite normal
/// operator, a fixed number of sweeps.
fn conjugate_gradient(u: &mut ComplexTensor3, rhs: &ComplexTensor3, ops: &[DiffOperator; 3]) {
    let mut r = rhs.sub(&normal_op(u, ops)).expect("same dims");
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..CG_ITERS {
        if rr == 0.0 {
            break;
        }
        let ap = normal_op(&p, ops);
        let step = rr / dot(&p, &ap);
        axpy(u, step, &p);
        axpy(&mut r, -step, &ap);
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for (pv, rv) in p.data_mut().iter_mut().zip(r.data()) {
            *pv = rv + *pv * beta;
        }
        rr = rr_next;
    }
}
