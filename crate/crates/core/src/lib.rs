//! Random polyhedral scenes: plane arrangements, scene assembly, rendering and
//! dataset packaging.

pub mod arrangement;
pub mod dataset;
pub mod geom;
pub mod mesh;
pub mod render;
pub mod scenegen;
