//! Triangulated spheres, their refinement, and their motion in time.

mod flow;
mod mesh;
mod snapshot;

pub use flow::{rho, FlowKind, FlowMap, VelocityField};
pub use mesh::{min_angle_deg, MeshInvariants, TriSurfaceMesh};
pub use snapshot::{ElementFrame, MeshSnapshot, MIN_TRIANGLE_AREA};

pub type Vec3 = nalgebra::Vector3<f64>;
