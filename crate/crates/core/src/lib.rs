//! Multi-resolution as-rigid-as-possible deformation.
//!
//! A fine mesh is decimated into a coarse proxy, every fine vertex is bound
//! to a coarse triangle and its offset is stored in that triangle's local
//! reference frame. The coarse mesh is then deformed with ARAP and the fine
//! geometry is rebuilt by replaying the offsets through the deformed frames,
//! optionally followed by a screened ARAP pass at full resolution.

pub mod arap;
pub mod bench;
pub mod error;
pub mod io;
pub mod lrf;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod refine;
pub mod remesh;
pub mod sparse;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use mesh::{check_deformation_compatible, EdgeWeights, Mesh, ScalarField};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
