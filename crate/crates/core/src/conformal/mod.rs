//! Discrete conformal maps from genus-0 meshes to the unit sphere.
//!
//! The pipeline removes one vertex, flattens the remaining disk, lays it out
//! in the plane, projects stereographically, puts the removed vertex back at
//! the north pole and Möbius-centers the result. Each stage contributes an
//! additive per-vertex log conformal factor.

pub mod flatten;
pub mod layout;
pub mod lobachevsky;
pub mod parameterize;
pub mod sphere;

pub use flatten::{angle_defects, flatten_disk, flatten_energy, flatten_hessian, FlattenOptions, FlattenReport, FlattenResult};
pub use layout::layout_plane;
pub use lobachevsky::lobachevsky;
pub use parameterize::{
    conformal_residuals, normalize_neighborhood, reinsert_vertex, spherical_parameterize, ConvergenceReport,
    ParameterizeOptions, SphericalParameterization, StageIncrement,
};
pub use sphere::{mobius_center, mobius_map, stereographic_to_sphere, weighted_center, MobiusOptions, MobiusReport};

use crate::linalg::SolveError;
use crate::mesh::MeshError;

#[derive(Debug, thiserror::Error)]
pub enum FlattenError {
    #[error("mesh is not a topological sphere (Euler characteristic {euler_characteristic}, boundary: {has_boundary})")]
    NotTopologicalSphere { euler_characteristic: i64, has_boundary: bool },
    #[error("expected a topological disk, got Euler characteristic {euler_characteristic}")]
    NotDisk { euler_characteristic: i64 },
    #[error("vertex {vertex} has degree {degree}; at least 3 is required")]
    Degree { vertex: usize, degree: usize },
    #[error("flattening did not converge in {iterations} Newton steps (max angle defect {max_defect:e})")]
    DidNotConverge { iterations: usize, max_defect: f64 },
    #[error("line search failed at Newton step {iteration} (max angle defect {max_defect:e})")]
    LineSearch { iteration: usize, max_defect: f64 },
    #[error("triangle inequality violated during {stage} on faces {faces:?}")]
    TriangleInequality { stage: &'static str, faces: Vec<usize> },
    #[error("Newton system: {0}")]
    Solve(#[from] SolveError),
    #[error("vertex {vertex} is not reachable from the seed face")]
    Disconnected { vertex: usize },
    #[error("planar layout misses edge {edge} by {relative_error:e} (relative)")]
    Layout { edge: usize, relative_error: f64 },
    #[error("planar layout flips face {face}")]
    LayoutOrientation { face: usize },
    #[error("face {face} at the reinserted vertex is degenerate on the sphere")]
    DegenerateReinsertion { face: usize },
    #[error("inscribed face {face} is not positively oriented")]
    InscribedOrientation { face: usize },
    #[error("Möbius centering stopped after {iterations} iterations at center norm {center_norm:e}")]
    Mobius { iterations: usize, center_norm: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}
