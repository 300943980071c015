//! Converts arbitrary triangle soups into watertight, orientable,
//! inversion-free 2-manifold meshes that fit the input surface.

pub mod cli;
pub mod geom;
pub mod extract;
pub mod halfedge;
pub mod mesh_io;
pub mod octree;
pub mod optimize;
pub mod pipeline;
pub mod spatial;
pub mod sharp;
pub mod validate;
pub mod fixtures;
