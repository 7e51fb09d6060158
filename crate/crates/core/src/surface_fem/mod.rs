//! P1 finite elements on a mesh snapshot: matrices, loads, projections and
//! exact integration over active/inactive cut regions.

mod assembly;
mod cut;
mod loads;
mod quadrature;

pub use assembly::{assemble_mass, assemble_stiffness, element_mass, mesh_pattern, LambdaField};
pub use cut::{
    cut_decompose, integrate_clamped, integrate_projected, polygon_area_fraction, projected_distance_sq,
    projected_inner, Bary, Clamped, CutPiece, CutRegion, Region, CLASSIFY_TOL,
};
pub use loads::{
    l2_project, l2_rhs, power_of_linear_rhs, project_power_of_linear, slab_mean_load, slab_mean_load_with,
    SLAB_GAUSS_POINTS,
};
pub use quadrature::{gauss_legendre, TRI7, TRI_MIDPOINTS};
