use num_complex::Complex64;

use super::{Axis, ComplexTensor3};

/// Forward first-order difference along one axis with a replicate
/// boundary: the final plane along the axis is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiffOperator {
    pub axis: Axis,
}

impl DiffOperator {
    pub fn new(axis: Axis) -> Self {
        Self { axis }
    }

    pub fn apply(&self, t: &ComplexTensor3) -> ComplexTensor3 {
        let (outer, n, inner) = split(t.dims(), self.axis);
        let src = t.data();
        let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
        for o in 0..outer {
            let base = o * n * inner;
            for p in 0..n.saturating_sub(1) {
                let cur = base + p * inner;
                let next = cur + inner;
                for q in 0..inner {
                    out[cur + q] = src[next + q] - src[cur + q];
                }
            }
        }
        ComplexTensor3::from_parts(t.dims(), out)
    }

    pub fn apply_adjoint(&self, t: &ComplexTensor3) -> ComplexTensor3 {
        let (outer, n, inner) = split(t.dims(), self.axis);
        let src = t.data();
        let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
        for o in 0..outer {
            let base = o * n * inner;
            for p in 0..n {
                let cur = base + p * inner;
                for q in 0..inner {
                    let mut v = Complex64::new(0.0, 0.0);
                    if p >= 1 {
                        v += src[cur - inner + q];
                    }
                    if p + 1 < n {
                        v -= src[cur + q];
                    }
                    out[cur + q] = v;
                }
            }
        }
        ComplexTensor3::from_parts(t.dims(), out)
    }
}

/// (product of dims before axis, extent of axis, product after axis)
fn split(dims: [usize; 3], axis: Axis) -> (usize, usize, usize) {
    match axis {
        Axis::Horizontal => (1, dims[0], dims[1] * dims[2]),
        Axis::Lateral => (dims[0], dims[1], dims[2]),
        Axis::Frontal => (dims[0] * dims[1], dims[2], 1),
    }
}

/// Anisotropic 3D total variation: the sum of the l1 norms of the three
/// differenced tensors.
pub fn tv_norm(t: &ComplexTensor3) -> f64 {
    Axis::ALL.iter().map(|&a| DiffOperator::new(a).apply(t).l1()).sum()
}
