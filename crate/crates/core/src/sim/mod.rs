//! Scene simulation: building point clouds, normalization and augmentation,
//! voxel projection, echo synthesis and canonical test objects.

mod building;
mod cloud;
mod grid;
mod objects;

pub use building::{generate_building, look_direction, BuildingKind, BuildingModel};
pub use cloud::{augment, normalize, Augmentation, PointCloud, ScatterPoint};
pub use grid::{project_to_grid, slant_coordinates, slant_range_phase, GridSpec, Projection};
pub use objects::{
    generate_echo, make_test_object, separation_cells, step_profile, ObjectMetadata, ObjectParams, TestObject,
};
