use std::collections::HashMap;

use super::MeshError;

/// Sentinel for "no face" in [`Topology::edge_faces`].
pub const NO_FACE: usize = usize::MAX;

/// Connectivity of an oriented manifold triangle mesh.
///
/// Edges are unordered and stored as `(min, max)` vertex pairs; faces keep
/// their orientation. `face_edges[f][c]` is the edge opposite corner `c`.
#[derive(Debug, Clone)]
pub struct Topology {
    n_vertices: usize,
    faces: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_lookup: HashMap<(usize, usize), usize>,
    face_edges: Vec<[usize; 3]>,
    edge_faces: Vec<[usize; 2]>,
    vertex_faces: Vec<Vec<usize>>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Topology {
    pub fn new(n_vertices: usize, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_lookup = HashMap::new();
        let mut face_edges = Vec::with_capacity(faces.len());
        let mut edge_faces: Vec<[usize; 2]> = Vec::new();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        let mut vertex_faces = vec![Vec::new(); n_vertices];

        // a third face on an edge always repeats a directed edge too; report
        // the manifold violation rather than the orientation one
        let mut incidence: HashMap<(usize, usize), u8> = HashMap::new();
        for tri in &faces {
            for c in 0..3 {
                let k = key(tri[(c + 1) % 3], tri[(c + 2) % 3]);
                let n = incidence.entry(k).or_insert(0);
                *n += 1;
                if *n > 2 && k.0 != k.1 {
                    return Err(MeshError::NonManifoldEdge { a: k.0, b: k.1 });
                }
            }
        }

        for (f, tri) in faces.iter().enumerate() {
            for &v in tri {
                if v >= n_vertices {
                    return Err(MeshError::IndexOutOfRange { face: f, index: v, n_vertices });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedIndex { face: f });
            }
            let mut fe = [0usize; 3];
            for c in 0..3 {
                let (a, b) = (tri[(c + 1) % 3], tri[(c + 2) % 3]);
                if let Some(&other) = directed.get(&(a, b)) {
                    return Err(MeshError::InconsistentOrientation { a, b, faces: [other, f] });
                }
                directed.insert((a, b), f);
                let k = key(a, b);
                let e = *edge_lookup.entry(k).or_insert_with(|| {
                    edges.push([k.0, k.1]);
                    edge_faces.push([NO_FACE, NO_FACE]);
                    edges.len() - 1
                });
                let slot = &mut edge_faces[e];
                if slot[0] == NO_FACE {
                    slot[0] = f;
                } else if slot[1] == NO_FACE {
                    slot[1] = f;
                } else {
                    return Err(MeshError::NonManifoldEdge { a: k.0, b: k.1 });
                }
                fe[c] = e;
                vertex_faces[tri[c]].push(f);
            }
            face_edges.push(fe);
        }
        if let Some(v) = vertex_faces.iter().position(Vec::is_empty) {
            return Err(MeshError::IsolatedVertex(v));
        }
        Ok(Topology { n_vertices, faces, edges, edge_lookup, face_edges, edge_faces, vertex_faces })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> [usize; 3] {
        self.faces[f]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&key(a, b)).copied()
    }

    /// Edge ids opposite each corner of face `f`.
    pub fn face_edges(&self, f: usize) -> [usize; 3] {
        self.face_edges[f]
    }

    /// The one or two faces incident to edge `e` ([`NO_FACE`] marks absence).
    pub fn edge_faces(&self, e: usize) -> [usize; 2] {
        self.edge_faces[e]
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_faces[e][1] == NO_FACE
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| self.is_boundary_edge(e))
    }

    pub fn has_boundary(&self) -> bool {
        self.boundary_edges().next().is_some()
    }

    /// Vertices touching at least one boundary edge.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut out = vec![false; self.n_vertices];
        for e in self.boundary_edges() {
            let [a, b] = self.edges[e];
            out[a] = true;
            out[b] = true;
        }
        out
    }

    /// `|F| - |E| + |V|`.
    pub fn euler_characteristic(&self) -> i64 {
        self.faces.len() as i64 - self.edges.len() as i64 + self.n_vertices as i64
    }

    /// Closed (no boundary) with Euler characteristic 2.
    pub fn is_topological_sphere(&self) -> bool {
        self.euler_characteristic() == 2 && !self.has_boundary()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors(v).len()
    }

    /// Distinct neighbors of `v` in increasing id order.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.vertex_faces[v]
            .iter()
            .flat_map(|&f| self.faces[f])
            .filter(|&w| w != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Neighbors of an interior vertex in counterclockwise order around its
    /// fan, starting from the lowest face id. `None` when the faces around
    /// `v` do not form a single closed fan.
    pub fn cyclic_ring(&self, v: usize) -> Option<Vec<usize>> {
        let fan = &self.vertex_faces[v];
        let mut next: HashMap<usize, usize> = HashMap::new();
        for &f in fan {
            let tri = self.faces[f];
            let c = tri.iter().position(|&w| w == v)?;
            next.insert(tri[(c + 1) % 3], tri[(c + 2) % 3]);
        }
        let start_face = *fan.iter().min()?;
        let tri = self.faces[start_face];
        let c = tri.iter().position(|&w| w == v)?;
        let start = tri[(c + 1) % 3];
        let mut ring = vec![start];
        let mut cur = *next.get(&start)?;
        while cur != start {
            if ring.len() > fan.len() {
                return None;
            }
            ring.push(cur);
            cur = *next.get(&cur)?;
        }
        (ring.len() == fan.len()).then_some(ring)
    }
}
