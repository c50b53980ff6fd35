//! Tomographic SAR sparse-reconstruction toolkit.
//!
//! * [`tensor`]: complex rank-3 tensors, slices, folds and difference operators
//! * [`forward`]: steering matrix, forward/adjoint operators, echo noise
//! * [`sim`]: procedural building scenes and canonical test objects
//! * [`solvers`]: ISTA/FISTA, slice-wise ISTA, the l1 + 3D-TV Split-Bregman
//!   solver, TV enhancement and a learned ISTA with per-block scalars
//! * [`metrics`]: image and point-cloud quality metrics
//! * [`io`]: TSR3 tensors, CSV point clouds, JSON documents

pub mod error;
pub mod forward;
pub mod io;
pub mod metrics;
pub mod sim;
pub mod solvers;
pub mod tensor;

pub use error::{Error, Result};
pub use forward::{SteeringMatrix, SystemGeometry};
pub use tensor::ComplexTensor3;
