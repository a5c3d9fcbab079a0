//! Conformal generative modeling on genus-0 triangle meshes.
//!
//! Geometry, conformal flattening, sphere correspondences and flows are
//! generic over the scalar type ([`scalar::Real`], implemented for `f32` and
//! `f64`). Registration and the dataset machinery work in `f64`. The type
//! aliases at the crate root fix the scalar to `f64`.

pub mod conformal;
pub mod correspondence;
pub mod flows;
pub mod linalg;
pub mod mesh;
pub mod registration;
pub mod scalar;
pub mod transport;

pub use scalar::Real;

pub type TriangleMesh = mesh::TriangleMesh<f64>;
pub type DiscreteMetric = mesh::DiscreteMetric<f64>;
pub type SurfacePoint = mesh::SurfacePoint<f64>;
pub type SphericalParameterization = conformal::SphericalParameterization<f64>;
pub type SphericalTriangulation = correspondence::SphericalTriangulation<f64>;
