//! Complex rank-3 tensors for scene (`N_z x N_x x N_y`) and echo
//! (`N_e x N_x x N_y`) data.
//!
//! Storage is row-major with the last index fastest: element `(i, j, k)`
//! lives at `(i * d1 + j) * d2 + k`. Every view below is defined relative
//! to that layout.
//!
//! Slice orientation:
//!
//! | axis         | slice             | rows | cols |
//! |--------------|-------------------|------|------|
//! | `Horizontal` | `X[i, :, :]`      | d1   | d2   |
//! | `Lateral`    | `X[:, j, :]`      | d0   | d2   |
//! | `Frontal`    | `X[:, :, k]`      | d0   | d1   |
//!
//! A frontal slice therefore has one elevation fiber per column.

mod diff;
mod fold;

pub use diff::{tv_norm, DiffOperator};
pub use fold::{FoldAxis, FoldedMatrix};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// One of the three tensor axes, named after the slice family that is
/// orthogonal to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    /// Axis 0 (elevation for scenes, baseline for echoes).
    Horizontal,
    /// Axis 1 (slant range).
    Lateral,
    /// Axis 2 (azimuth).
    Frontal,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Horizontal, Axis::Lateral, Axis::Frontal];

    pub fn index(self) -> usize {
        match self {
            Axis::Horizontal => 0,
            Axis::Lateral => 1,
            Axis::Frontal => 2,
        }
    }
}

/// Dense complex tensor of rank 3.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor3 {
    dims: [usize; 3],
    data: Vec<Complex64>,
}

impl ComplexTensor3 {
    /// Builds a tensor from row-major data. Rejects empty extents, length
    /// mismatches and non-finite entries.
    pub fn new(dims: [usize; 3], data: Vec<Complex64>) -> Result<Self> {
        check_dims(dims)?;
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "data length {} does not match dims {:?} ({} elements)",
                data.len(),
                dims,
                expected
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Precondition(format!("non-finite entry at flat index {pos}")));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 3]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            dims,
            data: vec![Complex64::new(0.0, 0.0); dims[0] * dims[1] * dims[2]],
        })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> Complex64) -> Result<Self> {
        check_dims(dims)?;
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::new(dims, data)
    }

    /// Internal constructor for buffers whose shape is already known to be
    /// right.
    pub(crate) fn from_parts(dims: [usize; 3], data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), dims[0] * dims[1] * dims[2]);
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Result<Complex64> {
        if i >= self.dims[0] || j >= self.dims[1] || k >= self.dims[2] {
            return Err(Error::Bounds(format!("({i}, {j}, {k}) outside {:?}", self.dims)));
        }
        Ok(self.data[self.offset(i, j, k)])
    }

    /// Number of axis-0 fibers, `d1 * d2`.
    pub fn fiber_count(&self) -> usize {
        self.dims[1] * self.dims[2]
    }

    /// The axis-0 fiber `X[:, j, k]`.
    pub fn fiber(&self, j: usize, k: usize) -> Result<Vec<Complex64>> {
        if j >= self.dims[1] || k >= self.dims[2] {
            return Err(Error::Bounds(format!(
                "fiber ({j}, {k}) outside {}x{}",
                self.dims[1], self.dims[2]
            )));
        }
        Ok(self.fiber_at(j * self.dims[2] + k))
    }

    /// Fiber by flat index `j * d2 + k`; panics when out of range.
    pub(crate) fn fiber_at(&self, flat: usize) -> Vec<Complex64> {
        let stride = self.fiber_count();
        (0..self.dims[0]).map(|i| self.data[i * stride + flat]).collect()
    }

    pub(crate) fn set_fiber_at(&mut self, flat: usize, values: &[Complex64]) {
        let stride = self.fiber_count();
        for (i, v) in values.iter().enumerate() {
            self.data[i * stride + flat] = *v;
        }
    }

    /// Assembles a tensor from its axis-0 fibers, given in flat `j * d2 + k`
    /// order.
    pub fn from_fibers(dims: [usize; 3], fibers: &[Vec<Complex64>]) -> Result<Self> {
        check_dims(dims)?;
        if fibers.len() != dims[1] * dims[2] || fibers.iter().any(|f| f.len() != dims[0]) {
            return Err(Error::Shape(format!("fiber set does not match dims {dims:?}")));
        }
        let mut out = Self::zeros(dims)?;
        for (flat, f) in fibers.iter().enumerate() {
            out.set_fiber_at(flat, f);
        }
        Ok(out)
    }

    /// Extracts one slice as a matrix; see the module docs for orientation.
    pub fn slice(&self, axis: Axis, index: usize) -> Result<DMatrix<Complex64>> {
        let [d0, d1, d2] = self.dims;
        let extent = self.dims[axis.index()];
        if index >= extent {
            return Err(Error::Bounds(format!("{axis:?} slice {index} outside extent {extent}")));
        }
        Ok(match axis {
            Axis::Horizontal => DMatrix::from_fn(d1, d2, |j, k| self.data[self.offset(index, j, k)]),
            Axis::Lateral => DMatrix::from_fn(d0, d2, |i, k| self.data[self.offset(i, index, k)]),
            Axis::Frontal => DMatrix::from_fn(d0, d1, |i, j| self.data[self.offset(i, j, index)]),
        })
    }

    /// Reassembles a tensor from every slice along `axis`, in index order.
    pub fn from_slices(axis: Axis, slices: &[DMatrix<Complex64>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::Shape("no slices to assemble".into()))?;
        let (r, c) = first.shape();
        let n = slices.len();
        let dims = match axis {
            Axis::Horizontal => [n, r, c],
            Axis::Lateral => [r, n, c],
            Axis::Frontal => [r, c, n],
        };
        check_dims(dims)?;
        if slices.iter().any(|s| s.shape() != (r, c)) {
            return Err(Error::Shape("slices have inconsistent shapes".into()));
        }
        let mut out = Self::zeros(dims)?;
        for (s_idx, s) in slices.iter().enumerate() {
            for col in 0..c {
                for row in 0..r {
                    let (i, j, k) = match axis {
                        Axis::Horizontal => (s_idx, row, col),
                        Axis::Lateral => (row, s_idx, col),
                        Axis::Frontal => (row, col, s_idx),
                    };
                    let off = out.offset(i, j, k);
                    out.data[off] = s[(row, col)];
                }
            }
        }
        Ok(out)
    }

    /// Frobenius norm, `sqrt(sum |x|^2)`.
    pub fn frobenius(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Sum of complex moduli.
    pub fn l1(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).sum()
    }

    /// Largest complex modulus (0 for an all-zero tensor).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `sum x * conj(y)`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).sum())
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        self.map(|z| z * factor)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_parts(self.dims, self.data.iter().map(|&z| f(z)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self::from_parts(
            self.dims,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }
}

fn check_dims(dims: [usize; 3]) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::Shape(format!("empty extent in dims {dims:?}")));
    }
    if dims[0]
        .checked_mul(dims[1])
        .and_then(|n| n.checked_mul(dims[2]))
        .is_none()
    {
        return Err(Error::Shape(format!("dims {dims:?} overflow")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(dims: [usize; 3]) -> ComplexTensor3 {
        let n = dims.iter().product::<usize>();
        ComplexTensor3::new(dims, (0..n).map(|v| Complex64::new(v as f64, 0.0)).collect()).unwrap()
    }

    #[test]
    fn fiber_follows_row_major_layout() {
        let t = ramp([2, 2, 2]);
        let f = t.fiber(0, 0).unwrap();
        assert_eq!(f, vec![Complex64::new(0.0, 0.0), Complex64::new(4.0, 0.0)]);
        let f = t.fiber(1, 1).unwrap();
        assert_eq!(f, vec![Complex64::new(3.0, 0.0), Complex64::new(7.0, 0.0)]);
    }

    #[test]
    fn fiber_of_zero_tensor_is_zero() {
        let t = ComplexTensor3::zeros([3, 2, 2]).unwrap();
        assert!(t.fiber(1, 0).unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn fiber_out_of_range_is_bounds_error() {
        let t = ramp([2, 3, 4]);
        assert!(matches!(t.fiber(3, 0), Err(Error::Bounds(_))));
        assert!(matches!(t.fiber(0, 4), Err(Error::Bounds(_))));
    }

    #[test]
    fn empty_extent_rejected() {
        assert!(matches!(ComplexTensor3::zeros([0, 2, 2]), Err(Error::Shape(_))));
        assert!(matches!(ComplexTensor3::new([2, 0, 1], vec![]), Err(Error::Shape(_))));
    }

    #[test]
    fn non_finite_rejected() {
        let data = vec![Complex64::new(f64::NAN, 0.0); 8];
        assert!(ComplexTensor3::new([2, 2, 2], data).is_err());
    }

    #[test]
    fn frontal_slices_partition_the_tensor() {
        let t = ramp([3, 4, 5]);
        let slices: Vec<_> = (0..5).map(|k| t.slice(Axis::Frontal, k).unwrap()).collect();
        assert_eq!(ComplexTensor3::from_slices(Axis::Frontal, &slices).unwrap(), t);
        for axis in Axis::ALL {
            let n = t.dims()[axis.index()];
            let s: Vec<_> = (0..n).map(|i| t.slice(axis, i).unwrap()).collect();
            assert_eq!(ComplexTensor3::from_slices(axis, &s).unwrap(), t);
        }
    }

    #[test]
    fn constant_along_axis2_gives_equal_frontal_slices() {
        let t = ComplexTensor3::from_fn([3, 4, 5], |i, j, _| Complex64::new(i as f64, j as f64)).unwrap();
        let s0 = t.slice(Axis::Frontal, 0).unwrap();
        for k in 1..5 {
            assert_eq!(t.slice(Axis::Frontal, k).unwrap(), s0);
        }
    }

    #[test]
    fn slice_out_of_range_is_bounds_error() {
        let t = ramp([2, 3, 4]);
        assert!(matches!(t.slice(Axis::Lateral, 3), Err(Error::Bounds(_))));
    }

    #[test]
    fn views_agree_with_direct_indexing_exhaustively() {
        for d0 in 1..=3 {
            for d1 in 1..=3 {
                for d2 in 1..=3 {
                    let t = ComplexTensor3::from_fn([d0, d1, d2], |i, j, k| {
                        Complex64::new((100 * i + 10 * j + k) as f64, -(k as f64))
                    })
                    .unwrap();
                    for i in 0..d0 {
                        for j in 0..d1 {
                            for k in 0..d2 {
                                let v = t.get(i, j, k).unwrap();
                                assert_eq!(t.fiber(j, k).unwrap()[i], v);
                                assert_eq!(t.slice(Axis::Horizontal, i).unwrap()[(j, k)], v);
                                assert_eq!(t.slice(Axis::Lateral, j).unwrap()[(i, k)], v);
                                assert_eq!(t.slice(Axis::Frontal, k).unwrap()[(i, j)], v);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn norms_on_small_cases() {
        let ones = ComplexTensor3::from_fn([2, 2, 2], |_, _, _| Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(ones.frobenius(), 8f64.sqrt());
        let mut spike = ComplexTensor3::zeros([2, 2, 2]).unwrap();
        spike.data_mut()[3] = Complex64::new(3.0, 4.0);
        assert_eq!(spike.l1(), 5.0);
    }

    #[test]
    fn binary_ops_check_dims() {
        let a = ComplexTensor3::zeros([2, 2, 2]).unwrap();
        let b = ComplexTensor3::zeros([2, 2, 3]).unwrap();
        assert!(matches!(a.inner(&b), Err(Error::Shape(_))));
        assert!(matches!(a.hadamard(&b), Err(Error::Shape(_))));
    }
}
