//! Plane-stress finite-element analysis on structured grids of unit
//! four-node quadrilaterals (unit thickness, 2x2 Gauss quadrature).

mod element;
mod mesh;
mod system;

pub use element::{element_stiffness, ElementKernel, ElementMatrix};
pub use mesh::Mesh;
pub use system::{
    assemble_and_solve, element_compliance_sensitivity, Axis, BoundaryConditions, FeModel,
    LinearSystemResult, PointLoad,
};
