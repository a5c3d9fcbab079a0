//! Embedded geometry: face areas and barycentric coordinates.

use serde::{Deserialize, Serialize};

use super::{MeshError, TriangleMesh};
use crate::linalg::vec3::{self, Vec3};
use crate::scalar::Real;

/// A point on a mesh: face id plus barycentric coordinates in that face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint<T> {
    pub face: usize,
    pub bary: [T; 3],
}

impl<T: Real> SurfacePoint<T> {
    pub fn new(face: usize, bary: [T; 3]) -> Self {
        SurfacePoint { face, bary }
    }

    /// Coordinates lie in [0, 1] and sum to one within `tol`.
    pub fn is_valid(&self, tol: T) -> bool {
        let sum: T = self.bary.iter().copied().sum();
        (sum - T::one()).abs() <= tol && self.bary.iter().all(|&b| b >= -tol && b <= T::one() + tol)
    }
}

/// Area of one face, `‖(f_j - f_i) × (f_k - f_i)‖ / 2`.
pub fn face_area<T: Real>(mesh: &TriangleMesh<T>, face: usize) -> T {
    triangle_area(mesh.face_positions(face))
}

pub fn triangle_area<T: Real>(p: [Vec3<T>; 3]) -> T {
    vec3::norm(vec3::cross(vec3::sub(p[1], p[0]), vec3::sub(p[2], p[0]))) * T::c(0.5)
}

pub fn total_area<T: Real>(mesh: &TriangleMesh<T>) -> T {
    (0..mesh.n_faces()).map(|f| face_area(mesh, f)).sum()
}

/// Per-vertex weight: one third of the total area of incident faces.
pub fn vertex_area_weights<T: Real>(mesh: &TriangleMesh<T>) -> Vec<T> {
    let third = T::one() / T::c(3.0);
    let mut w = vec![T::zero(); mesh.n_vertices()];
    for (f, tri) in mesh.faces().iter().enumerate() {
        let a = face_area(mesh, f) * third;
        for &v in tri {
            w[v] += a;
        }
    }
    w
}

pub fn barycentric_point<T: Real>(mesh: &TriangleMesh<T>, sp: &SurfacePoint<T>) -> Vec3<T> {
    vec3::combine(mesh.face_positions(sp.face), sp.bary)
}

/// Relative off-plane tolerance for [`locate_barycentric`], as a fraction of
/// the face diameter.
pub const OFF_PLANE_TOL: f64 = 1e-9;

/// Barycentric coordinates of `point` in `face`; the point must lie on the
/// face plane within [`OFF_PLANE_TOL`] of the face diameter.
pub fn locate_barycentric<T: Real>(
    mesh: &TriangleMesh<T>,
    face: usize,
    point: Vec3<T>,
) -> Result<SurfacePoint<T>, MeshError> {
    let [p0, p1, p2] = mesh.face_positions(face);
    let (bary, off) = barycentric_in_triangle([p0, p1, p2], point);
    let diameter = vec3::dist(p0, p1).max(vec3::dist(p1, p2)).max(vec3::dist(p2, p0));
    if off > T::c(OFF_PLANE_TOL) * diameter {
        return Err(MeshError::OffPlane { face, distance: off.f64() });
    }
    Ok(SurfacePoint { face, bary })
}

/// Least-squares barycentric coordinates and distance of `point` from the
/// triangle's plane.
pub fn barycentric_in_triangle<T: Real>(p: [Vec3<T>; 3], point: Vec3<T>) -> ([T; 3], T) {
    let e1 = vec3::sub(p[1], p[0]);
    let e2 = vec3::sub(p[2], p[0]);
    let d = vec3::sub(point, p[0]);
    let (a11, a12, a22) = (vec3::dot(e1, e1), vec3::dot(e1, e2), vec3::dot(e2, e2));
    let (b1, b2) = (vec3::dot(e1, d), vec3::dot(e2, d));
    let den = a11 * a22 - a12 * a12;
    let s = (a22 * b1 - a12 * b2) / den;
    let t = (a11 * b2 - a12 * b1) / den;
    let bary = [T::one() - s - t, s, t];
    let proj = vec3::combine(p, bary);
    (bary, vec3::dist(proj, point))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generators;
    use rand::{Rng, SeedableRng};

    #[test]
    fn unit_right_triangle_area() {
        let mesh = TriangleMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert_eq!(face_area(&mesh, 0), 0.5);
        assert_eq!(triangle_area([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]), 0.0);
    }

    #[test]
    fn inscribed_tetrahedron_total_area() {
        let t = generators::tetrahedron::<f64>();
        // edge a = sqrt(8/3), total = sqrt(3) a²
        let expect = 3f64.sqrt() * 8.0 / 3.0;
        assert!((total_area(&t) - expect).abs() < 1e-13);
    }

    #[test]
    fn vertex_and_centroid() {
        let ico = generators::icosahedron::<f64>();
        let tri = ico.faces()[3];
        let v = barycentric_point(&ico, &SurfacePoint::new(3, [1.0, 0.0, 0.0]));
        assert_eq!(v, ico.position(tri[0]));
        let third = 1.0 / 3.0;
        let c = barycentric_point(&ico, &SurfacePoint::new(3, [third; 3]));
        let expect = vec3::scale(vec3::add(vec3::add(ico.position(tri[0]), ico.position(tri[1])), ico.position(tri[2])), third);
        assert!(vec3::dist(c, expect) < 1e-15);
    }

    #[test]
    fn barycentric_round_trip() {
        let mesh = generators::blob(&generators::geodesic_sphere::<f64>(2), 0.3, 1.3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let f = rng.random_range(0..mesh.n_faces());
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let b = [1.0 - r1.sqrt(), r1.sqrt() * (1.0 - r2), r1.sqrt() * r2];
            let p = barycentric_point(&mesh, &SurfacePoint::new(f, b));
            let sp = locate_barycentric(&mesh, f, p).unwrap();
            for k in 0..3 {
                assert!((sp.bary[k] - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn off_plane_is_rejected() {
        let mesh = TriangleMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(locate_barycentric(&mesh, 0, [0.2, 0.2, 1e-3]), Err(MeshError::OffPlane { .. })));
    }
}
