//! Correspondences between the source mesh, the inscribed mesh and the unit
//! sphere: point location, ray projection, interpolated log conformal
//! factor and the change of area of the sphere-to-mesh map.

mod bvh;

pub use bvh::{cap_box, Aabb, Bvh};

use crate::conformal::SphericalParameterization;
use crate::linalg::vec3::{self, Vec3};
use crate::mesh::TriangleMesh;
use crate::scalar::Real;

/// Numerical tolerances of this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Slack on the arc determinants when testing containment.
    pub containment: f64,
    /// Allowed deviation of query points from unit length.
    pub unit: f64,
    /// Smallest admissible `|((f̃_j−f̃_i)×(f̃_k−f̃_i))·x|`.
    pub ray_denominator: f64,
}

pub const TOLERANCES: Tolerances = Tolerances { containment: 1e-12, unit: 1e-9, ray_denominator: 1e-14 };

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorrespondenceError {
    #[error("query point has norm {0}, expected 1")]
    NotUnit(f64),
    #[error("no spherical triangle contains the query point (orientation invariant violated)")]
    NotFound,
    #[error("ray is parallel to face {0}")]
    ParallelRay(usize),
    #[error("cannot normalize the zero vector")]
    ZeroVector,
    #[error("parameterization has {got} vertices but the mesh has {expected}")]
    VertexCount { got: usize, expected: usize },
}

/// A located query: face id, ray scale `α` and barycentric coordinates of
/// `αx` in the inscribed face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Located<T> {
    pub face: usize,
    pub alpha: T,
    pub bary: [T; 3],
}

/// Central projections of the inscribed faces, indexed for point location,
/// together with the source data needed for `ū` and `Δ`.
#[derive(Debug, Clone)]
pub struct SphericalTriangulation<T> {
    faces: Vec<[usize; 3]>,
    sphere: Vec<Vec3<T>>,
    u: Vec<T>,
    /// `‖(f_j−f_i)×(f_k−f_i)‖` on the source mesh.
    source_double_area: Vec<T>,
    bvh: Bvh<T>,
}

impl<T: Real> SphericalTriangulation<T> {
    pub fn new(source: &TriangleMesh<T>, param: &SphericalParameterization<T>) -> Result<Self, CorrespondenceError> {
        Self::from_parts(source, param.positions.clone(), param.u.clone())
    }

    /// Build from explicit unit positions and log conformal factors.
    pub fn from_parts(source: &TriangleMesh<T>, sphere: Vec<Vec3<T>>, u: Vec<T>) -> Result<Self, CorrespondenceError> {
        if sphere.len() != source.n_vertices() || u.len() != source.n_vertices() {
            return Err(CorrespondenceError::VertexCount { got: sphere.len(), expected: source.n_vertices() });
        }
        let faces = source.faces().to_vec();
        let source_double_area = (0..faces.len())
            .map(|f| {
                let [a, b, c] = source.face_positions(f);
                vec3::norm(vec3::cross(vec3::sub(b, a), vec3::sub(c, a)))
            })
            .collect();
        let boxes: Vec<Aabb<T>> = faces.iter().map(|t| cap_box(t.map(|v| sphere[v]))).collect();
        let bvh = Bvh::build(&boxes);
        Ok(SphericalTriangulation { faces, sphere, u, source_double_area, bvh })
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn face(&self, f: usize) -> [usize; 3] {
        self.faces[f]
    }

    pub fn sphere_positions(&self) -> &[Vec3<T>] {
        &self.sphere
    }

    pub fn log_conformal_factors(&self) -> &[T] {
        &self.u
    }

    fn face_sphere(&self, f: usize) -> [Vec3<T>; 3] {
        self.faces[f].map(|v| self.sphere[v])
    }

    /// Whether the spherical triangle of `f` contains `x` (with slack).
    pub fn contains(&self, f: usize, x: Vec3<T>) -> bool {
        let [a, b, c] = self.face_sphere(f);
        let tol = -T::c(TOLERANCES.containment);
        vec3::det(a, b, x) >= tol && vec3::det(b, c, x) >= tol && vec3::det(c, a, x) >= tol
    }

    fn check_unit(x: Vec3<T>) -> Result<(), CorrespondenceError> {
        let n = vec3::norm(x);
        if (n - T::one()).abs() > T::c(TOLERANCES.unit) {
            return Err(CorrespondenceError::NotUnit(n.f64()));
        }
        Ok(())
    }

    /// Lowest-id face whose spherical triangle contains `x`.
    pub fn locate(&self, x: Vec3<T>) -> Result<usize, CorrespondenceError> {
        Self::check_unit(x)?;
        let mut best = usize::MAX;
        self.bvh.for_each_candidate(x, |f| {
            if f < best && self.contains(f, x) {
                best = f;
            }
        });
        if best == usize::MAX {
            Err(CorrespondenceError::NotFound)
        } else {
            Ok(best)
        }
    }

    /// Linear scan over all faces; reference for [`Self::locate`].
    pub fn locate_brute_force(&self, x: Vec3<T>) -> Result<usize, CorrespondenceError> {
        Self::check_unit(x)?;
        (0..self.faces.len()).find(|&f| self.contains(f, x)).ok_or(CorrespondenceError::NotFound)
    }

    /// Intersection of the ray through `x` with the plane of inscribed face
    /// `f`: returns `(αx, α)` with
    /// `α = ((f̃_j×f̃_k)·f̃_i) / (((f̃_j−f̃_i)×(f̃_k−f̃_i))·x)`.
    pub fn sphere_to_inscribed(&self, x: Vec3<T>, f: usize) -> Result<(Vec3<T>, T), CorrespondenceError> {
        let [a, b, c] = self.face_sphere(f);
        let num = vec3::det(a, b, c);
        let den = vec3::dot(vec3::cross(vec3::sub(b, a), vec3::sub(c, a)), x);
        if den <= T::c(TOLERANCES.ray_denominator) {
            return Err(CorrespondenceError::ParallelRay(f));
        }
        let alpha = num / den;
        Ok((vec3::scale(x, alpha), alpha))
    }

    /// Barycentric coordinates of the ray through `x` in inscribed face `f`,
    /// `∝ (det(x,f̃_j,f̃_k), det(f̃_i,x,f̃_k), det(f̃_i,f̃_j,x))`.
    pub fn barycentric(&self, x: Vec3<T>, f: usize) -> [T; 3] {
        let [a, b, c] = self.face_sphere(f);
        let w = [vec3::det(x, b, c), vec3::det(a, x, c), vec3::det(a, b, x)];
        let s = w[0] + w[1] + w[2];
        w.map(|v| v / s)
    }

    pub fn query(&self, x: Vec3<T>) -> Result<Located<T>, CorrespondenceError> {
        let face = self.locate(x)?;
        let (_, alpha) = self.sphere_to_inscribed(x, face)?;
        Ok(Located { face, alpha, bary: self.barycentric(x, face) })
    }

    /// Interpolated log conformal factor `ū(x)`.
    pub fn interp_log_conformal(&self, x: Vec3<T>) -> Result<T, CorrespondenceError> {
        let f = self.locate(x)?;
        Ok(self.interp_in_face(x, f))
    }

    pub fn interp_in_face(&self, x: Vec3<T>, f: usize) -> T {
        let b = self.barycentric(x, f);
        let t = self.faces[f];
        b[0] * self.u[t[0]] + b[1] * self.u[t[1]] + b[2] * self.u[t[2]]
    }

    /// Area factor of the central projection from the sphere onto the plane
    /// of face `f`: `(n·f̃_i)² / |n·x|³` for the unit normal `n`.
    pub fn projection_area_factor(&self, x: Vec3<T>, f: usize) -> T {
        let [a, b, c] = self.face_sphere(f);
        let n = vec3::normalize(vec3::cross(vec3::sub(b, a), vec3::sub(c, a)));
        let d = vec3::dot(n, a);
        d * d / vec3::dot(n, x).abs().powi(3)
    }

    /// Change of area `Δ(x)` of the map from the sphere to the source mesh,
    /// `((f̃_j×f̃_k)·f̃_i)² ‖(f_j−f_i)×(f_k−f_i)‖ / |((f̃_j−f̃_i)×(f̃_k−f̃_i))·x|³`.
    pub fn change_of_area(&self, x: Vec3<T>, f: usize) -> T {
        let [a, b, c] = self.face_sphere(f);
        let num = vec3::det(a, b, c);
        let den = vec3::dot(vec3::cross(vec3::sub(b, a), vec3::sub(c, a)), x).abs();
        num * num * self.source_double_area[f] / (den * den * den)
    }

    /// Area of the inscribed (flat) face.
    pub fn inscribed_area(&self, f: usize) -> T {
        let [a, b, c] = self.face_sphere(f);
        vec3::norm(vec3::cross(vec3::sub(b, a), vec3::sub(c, a))) * T::c(0.5)
    }

    pub fn source_area(&self, f: usize) -> T {
        self.source_double_area[f] * T::c(0.5)
    }

    /// Area of the spherical triangle of face `f`.
    pub fn spherical_area(&self, f: usize) -> T {
        spherical_triangle_area(self.face_sphere(f))
    }

    pub fn total_spherical_area(&self) -> T {
        (0..self.faces.len()).map(|f| self.spherical_area(f)).sum()
    }

    /// Point on the source mesh for a sphere point: locate, then reuse the
    /// inscribed barycentric coordinates on the same source face.
    pub fn to_surface(&self, x: Vec3<T>) -> Result<crate::mesh::SurfacePoint<T>, CorrespondenceError> {
        let f = self.locate(x)?;
        Ok(crate::mesh::SurfacePoint::new(f, self.barycentric(x, f)))
    }

    /// Sphere image of a point on the source mesh: the same barycentric
    /// combination on the inscribed face, normalized.
    pub fn from_surface(&self, sp: &crate::mesh::SurfacePoint<T>) -> Result<Vec3<T>, CorrespondenceError> {
        inscribed_to_sphere(vec3::combine(self.face_sphere(sp.face), sp.bary))
    }
}

/// Radial projection of a point of the inscribed mesh to the sphere.
pub fn inscribed_to_sphere<T: Real>(p: Vec3<T>) -> Result<Vec3<T>, CorrespondenceError> {
    let n = vec3::norm(p);
    if n == T::zero() {
        return Err(CorrespondenceError::ZeroVector);
    }
    Ok(vec3::scale(p, T::one() / n))
}

/// Spherical excess of the triangle on three unit vectors
/// (Van Oosterom–Strackee).
pub fn spherical_triangle_area<T: Real>(v: [Vec3<T>; 3]) -> T {
    let [a, b, c] = v;
    let num = vec3::det(a, b, c);
    let den = T::one() + vec3::dot(a, b) + vec3::dot(b, c) + vec3::dot(c, a);
    T::c(2.0) * num.atan2(den)
}
