//! Slices-to-matrix (`fold_i`) and fiber-stacking (matricize) operators.
//!
//! `fold` along a slice axis turns every slice orthogonal to that axis into
//! one column, so column `c` of the result is slice `c` vectorized in
//! row-major order of the two remaining indices. The fiber variant stacks
//! the axis-0 fibers side by side, column `j * d2 + k`.

use num_complex::Complex64;

use super::{Axis, ComplexTensor3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FoldAxis {
    Horizontal,
    Lateral,
    Frontal,
    Fiber,
}

impl From<Axis> for FoldAxis {
    fn from(axis: Axis) -> Self {
        match axis {
            Axis::Horizontal => FoldAxis::Horizontal,
            Axis::Lateral => FoldAxis::Lateral,
            Axis::Frontal => FoldAxis::Frontal,
        }
    }
}

/// Column-major complex matrix produced by [`ComplexTensor3::fold`].
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
    fold_axis: FoldAxis,
}

/// `(row, col)` position of tensor element `(i, j, k)` under a fold.
#[inline]
fn position(axis: FoldAxis, dims: [usize; 3], i: usize, j: usize, k: usize) -> (usize, usize) {
    let [_, d1, d2] = dims;
    match axis {
        FoldAxis::Horizontal => (j * d2 + k, i),
        FoldAxis::Lateral => (i * d2 + k, j),
        FoldAxis::Frontal => (i * d1 + j, k),
        FoldAxis::Fiber => (i, j * d2 + k),
    }
}

fn shape(axis: FoldAxis, dims: [usize; 3]) -> (usize, usize) {
    let [d0, d1, d2] = dims;
    match axis {
        FoldAxis::Horizontal => (d1 * d2, d0),
        FoldAxis::Lateral => (d0 * d2, d1),
        FoldAxis::Frontal => (d0 * d1, d2),
        FoldAxis::Fiber => (d0, d1 * d2),
    }
}

impl ComplexTensor3 {
    pub fn fold(&self, axis: FoldAxis) -> FoldedMatrix {
        let dims = self.dims();
        let (rows, cols) = shape(axis, dims);
        let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
        let mut src = self.data().iter();
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let (r, c) = position(axis, dims, i, j, k);
                    data[c * rows + r] = *src.next().expect("length checked at construction");
                }
            }
        }
        FoldedMatrix {
            rows,
            cols,
            data,
            fold_axis: axis,
        }
    }

    /// Fiber-stacking matricization `M(X)`.
    pub fn matricize(&self) -> FoldedMatrix {
        self.fold(FoldAxis::Fiber)
    }
}

impl FoldedMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>, fold_axis: FoldAxis) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} elements cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            data,
            fold_axis,
        })
    }

    pub(crate) fn zeros_like(other: &Self) -> Self {
        Self {
            rows: other.rows,
            cols: other.cols,
            data: vec![Complex64::new(0.0, 0.0); other.data.len()],
            fold_axis: other.fold_axis,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn fold_axis(&self) -> FoldAxis {
        self.fold_axis
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[col * self.rows + row]
    }

    pub fn column(&self, col: usize) -> &[Complex64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    /// Inverse of [`ComplexTensor3::fold`].
    pub fn unfold(&self, dims: [usize; 3]) -> Result<ComplexTensor3> {
        let expected = shape(self.fold_axis, dims);
        if dims.iter().any(|&d| d == 0) || expected != (self.rows, self.cols) {
            return Err(Error::Shape(format!(
                "{}x{} {:?} matrix cannot unfold to {dims:?}",
                self.rows, self.cols, self.fold_axis
            )));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let (r, c) = position(self.fold_axis, dims, i, j, k);
                    data.push(self.data[c * self.rows + r]);
                }
            }
        }
        Ok(ComplexTensor3::from_parts(dims, data))
    }

    /// Inverse of [`ComplexTensor3::matricize`].
    pub fn dematricize(&self, dims: [usize; 3]) -> Result<ComplexTensor3> {
        if self.fold_axis != FoldAxis::Fiber {
            return Err(Error::Shape(format!(
                "{:?} fold is not a fiber matricization",
                self.fold_axis
            )));
        }
        self.unfold(dims)
    }

    /// Forward first-order difference across adjacent columns (adjacent
    /// slices of the source tensor); the last column is zero.
    pub fn diff_columns(&self) -> Self {
        let mut out = Self::zeros_like(self);
        let n = self.rows;
        for c in 0..self.cols.saturating_sub(1) {
            let (cur, next) = (&self.data[c * n..(c + 1) * n], &self.data[(c + 1) * n..(c + 2) * n]);
            for ((o, a), b) in out.data[c * n..(c + 1) * n].iter_mut().zip(cur).zip(next) {
                *o = b - a;
            }
        }
        out
    }

    /// Adjoint of [`Self::diff_columns`].
    pub fn diff_columns_adjoint(&self) -> Self {
        let mut out = Self::zeros_like(self);
        let n = self.rows;
        let cols = self.cols;
        for c in 0..cols {
            let o = &mut out.data[c * n..(c + 1) * n];
            if c >= 1 {
                for (o, p) in o.iter_mut().zip(&self.data[(c - 1) * n..c * n]) {
                    *o += p;
                }
            }
            if c + 1 < cols {
                for (o, q) in o.iter_mut().zip(&self.data[c * n..(c + 1) * n]) {
                    *o -= q;
                }
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn l1(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(dims: [usize; 3]) -> ComplexTensor3 {
        ComplexTensor3::from_fn(dims, |i, j, k| {
            Complex64::new((i * 7 + j * 3 + k) as f64 * 0.37, (i + 2 * k) as f64 - j as f64)
        })
        .unwrap()
    }

    #[test]
    fn fold_shapes_follow_slice_counts() {
        let t = sample([2, 2, 2]);
        let f = t.fold(FoldAxis::Horizontal);
        assert_eq!((f.rows(), f.cols()), (4, 2));
        let t = sample([3, 4, 5]);
        assert_eq!(
            {
                let f = t.fold(FoldAxis::Lateral);
                (f.rows(), f.cols())
            },
            (15, 4)
        );
        let f = t.fold(FoldAxis::Frontal);
        assert_eq!((f.rows(), f.cols()), (12, 5));
        let f = t.matricize();
        assert_eq!((f.rows(), f.cols()), (3, 20));
    }

    #[test]
    fn columns_are_vectorized_slices() {
        let t = sample([3, 4, 5]);
        for axis in Axis::ALL {
            let f = t.fold(axis.into());
            for c in 0..f.cols() {
                let s = t.slice(axis, c).unwrap();
                // slices are vectorized row-major
                let mut v = Vec::new();
                for r in 0..s.nrows() {
                    for q in 0..s.ncols() {
                        v.push(s[(r, q)]);
                    }
                }
                assert_eq!(f.column(c), v.as_slice());
            }
        }
        let m = t.matricize();
        assert_eq!(m.column(2 * 5 + 3), t.fiber(2, 3).unwrap().as_slice());
    }

    #[test]
    fn unfold_rejects_inconsistent_dims() {
        let t = sample([3, 4, 5]);
        let f = t.fold(FoldAxis::Frontal);
        assert!(matches!(f.unfold([3, 5, 4]), Err(Error::Shape(_))));
        assert!(matches!(f.unfold([3, 4, 0]), Err(Error::Shape(_))));
        assert!(matches!(
            t.fold(FoldAxis::Lateral).dematricize([3, 4, 5]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn column_difference_adjoint_on_single_column_is_zero() {
        let t = sample([3, 4, 1]);
        let f = t.fold(FoldAxis::Frontal);
        assert!(f.diff_columns().data().iter().all(|z| z.norm() == 0.0));
        assert!(f.diff_columns_adjoint().data().iter().all(|z| z.norm() == 0.0));
    }
}
