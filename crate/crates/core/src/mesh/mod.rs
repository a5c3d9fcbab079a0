//! Triangle meshes: connectivity, embedding, discrete metric, file formats
//! and the geometric primitives consumed by the rest of the crate.

pub mod generators;
pub mod geometry;
pub mod io;
pub mod metric;
mod topology;

pub use geometry::{barycentric_point, face_area, locate_barycentric, total_area, SurfacePoint};
pub use io::{load_mesh, read_intensities, write_obj, write_ply, MeshFormat};
pub use metric::{cotan_laplacian, corner_angles, DiscreteMetric};
pub use topology::{Topology, NO_FACE};

use crate::linalg::vec3::{self, Vec3};
use crate::scalar::Real;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported mesh format `{0}`")]
    UnsupportedFormat(String),
    #[error("face at line {line} has {count} vertices; only triangles are accepted")]
    PolygonFace { line: usize, count: usize },
    #[error("face {face} references vertex {index} but the mesh has {n_vertices} vertices")]
    IndexOutOfRange { face: usize, index: usize, n_vertices: usize },
    #[error("face {face} repeats a vertex")]
    RepeatedIndex { face: usize },
    #[error("non-manifold edge ({a}, {b}) shared by more than two faces")]
    NonManifoldEdge { a: usize, b: usize },
    #[error("directed edge ({a}, {b}) appears in faces {faces:?}; orientation is inconsistent")]
    InconsistentOrientation { a: usize, b: usize, faces: [usize; 2] },
    #[error("vertex {0} is not referenced by any face")]
    IsolatedVertex(usize),
    #[error("edge ({a}, {b}) has zero length")]
    ZeroLengthEdge { a: usize, b: usize },
    #[error("degenerate faces violate the triangle inequality: {faces:?}")]
    DegenerateFaces { faces: Vec<usize> },
    #[error("point lies {distance:e} off the plane of face {face}")]
    OffPlane { face: usize, distance: f64 },
    #[error("intensity file has {got} values for {expected} vertices")]
    IntensityCount { got: usize, expected: usize },
}

/// Validated manifold triangle mesh with a vertex embedding in ℝ³.
#[derive(Debug, Clone)]
pub struct TriangleMesh<T> {
    topology: Topology,
    positions: Vec<Vec3<T>>,
}

impl<T: Real> TriangleMesh<T> {
    /// Build and validate: manifold edges, consistent orientation, no
    /// isolated vertices and no zero-length edges.
    pub fn new(positions: Vec<Vec3<T>>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let topology = Topology::new(positions.len(), faces)?;
        for &[a, b] in topology.edges() {
            if positions[a] == positions[b] {
                return Err(MeshError::ZeroLengthEdge { a, b });
            }
        }
        Ok(TriangleMesh { topology, positions })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn positions(&self) -> &[Vec3<T>] {
        &self.positions
    }

    pub fn position(&self, v: usize) -> Vec3<T> {
        self.positions[v]
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        self.topology.faces()
    }

    pub fn n_vertices(&self) -> usize {
        self.topology.n_vertices()
    }

    pub fn n_edges(&self) -> usize {
        self.topology.n_edges()
    }

    pub fn n_faces(&self) -> usize {
        self.topology.n_faces()
    }

    pub fn face_positions(&self, f: usize) -> [Vec3<T>; 3] {
        self.topology.face(f).map(|v| self.positions[v])
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.topology.euler_characteristic()
    }

    pub fn is_topological_sphere(&self) -> bool {
        self.topology.is_topological_sphere()
    }

    /// Same connectivity, new embedding.
    pub fn with_positions(&self, positions: Vec<Vec3<T>>) -> Self {
        assert_eq!(positions.len(), self.positions.len());
        TriangleMesh { topology: self.topology.clone(), positions }
    }

    pub fn map_positions(&self, f: impl Fn(Vec3<T>) -> Vec3<T>) -> Self {
        self.with_positions(self.positions.iter().map(|&p| f(p)).collect())
    }

    pub fn scaled(&self, s: T) -> Self {
        self.map_positions(|p| vec3::scale(p, s))
    }

    /// Convert the embedding to another scalar type.
    pub fn cast<U: Real>(&self) -> TriangleMesh<U> {
        TriangleMesh {
            topology: self.topology.clone(),
            positions: self.positions.iter().map(|p| p.map(|x| U::c(x.f64()))).collect(),
        }
    }
}

/// `|F| - |E| + |V|` of a mesh.
pub fn euler_characteristic<T: Real>(mesh: &TriangleMesh<T>) -> i64 {
    mesh.euler_characteristic()
}

pub fn is_topological_sphere<T: Real>(mesh: &TriangleMesh<T>) -> bool {
    mesh.is_topological_sphere()
}

#[cfg(test)]
mod tests {
    use super::generators;
    use super::*;

    #[test]
    fn platonic_counts_and_euler() {
        let t = generators::tetrahedron::<f64>();
        assert_eq!((t.n_vertices(), t.n_edges(), t.n_faces()), (4, 6, 4));
        let ico = generators::icosahedron::<f64>();
        assert_eq!((ico.n_vertices(), ico.n_edges(), ico.n_faces()), (12, 30, 20));
        assert_eq!(ico.euler_characteristic(), 2);
        assert!(ico.is_topological_sphere());
    }

    #[test]
    fn torus_and_triangle_are_not_spheres() {
        let torus = generators::torus::<f64>(8, 8, 2.0, 0.7);
        assert_eq!(torus.euler_characteristic(), 0);
        assert!(!torus.is_topological_sphere());
        let tri = generators::single_triangle::<f64>();
        assert_eq!(tri.euler_characteristic(), 1);
        assert!(!tri.is_topological_sphere());
    }

    #[test]
    fn rejects_edge_shared_by_three_faces() {
        let p = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        let f = vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        let err = TriangleMesh::new(p, f).unwrap_err();
        assert!(matches!(err, MeshError::NonManifoldEdge { .. } | MeshError::InconsistentOrientation { .. }));
        // with orientation that would otherwise be legal for the first two faces
        let p = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        let f = vec![[0, 1, 2], [1, 0, 3], [4, 1, 0]];
        assert!(matches!(TriangleMesh::new(p, f).unwrap_err(), MeshError::NonManifoldEdge { a: 0, b: 1 }));
    }

    #[test]
    fn rejects_isolated_vertex_and_zero_edge() {
        let p = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [5.0, 5.0, 5.0]];
        assert!(matches!(TriangleMesh::new(p, vec![[0, 1, 2]]).unwrap_err(), MeshError::IsolatedVertex(3)));
        let p = vec![[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert!(matches!(TriangleMesh::new(p, vec![[0, 1, 2]]).unwrap_err(), MeshError::ZeroLengthEdge { .. }));
    }

    #[test]
    fn cyclic_ring_walks_the_fan() {
        let ico = generators::icosahedron::<f64>();
        for v in 0..12 {
            let ring = ico.topology().cyclic_ring(v).unwrap();
            assert_eq!(ring.len(), 5);
            for k in 0..5 {
                assert!(ico.topology().edge_index(ring[k], ring[(k + 1) % 5]).is_some());
            }
        }
    }
}
