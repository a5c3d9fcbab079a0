//! Discrete metrics (edge lengths), intrinsic angles and the cotangent
//! Laplacian.

use super::{MeshError, Topology, TriangleMesh};
use crate::linalg::vec3;
use crate::linalg::CsrMatrix;
use crate::scalar::Real;

/// Relative slack below which a face counts as violating the triangle
/// inequality.
pub const TRIANGLE_INEQUALITY_TOL: f64 = 1e-12;

/// Positive length per edge, indexed by edge id of the owning [`Topology`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMetric<T> {
    lengths: Vec<T>,
}

impl<T: Real> DiscreteMetric<T> {
    /// Euclidean edge lengths of the embedding, validated per face.
    pub fn from_mesh(mesh: &TriangleMesh<T>) -> Result<Self, MeshError> {
        let p = mesh.positions();
        let lengths = mesh.topology().edges().iter().map(|&[a, b]| vec3::dist(p[a], p[b])).collect();
        let metric = DiscreteMetric { lengths };
        metric.validate(mesh.topology())?;
        Ok(metric)
    }

    /// Wrap raw lengths without validation.
    pub fn from_lengths(lengths: Vec<T>) -> Self {
        DiscreteMetric { lengths }
    }

    pub fn lengths(&self) -> &[T] {
        &self.lengths
    }

    pub fn length(&self, e: usize) -> T {
        self.lengths[e]
    }

    /// Lengths opposite corners 0, 1, 2 of face `f`.
    pub fn face_lengths(&self, topo: &Topology, f: usize) -> [T; 3] {
        topo.face_edges(f).map(|e| self.lengths[e])
    }

    /// Faces whose lengths violate the strict triangle inequality.
    pub fn degenerate_faces(&self, topo: &Topology) -> Vec<usize> {
        (0..topo.n_faces()).filter(|&f| !satisfies_triangle_inequality(self.face_lengths(topo, f))).collect()
    }

    pub fn validate(&self, topo: &Topology) -> Result<(), MeshError> {
        let faces = self.degenerate_faces(topo);
        if faces.is_empty() {
            Ok(())
        } else {
            Err(MeshError::DegenerateFaces { faces })
        }
    }

    /// Conformal rescaling `ℓ̃_ij = exp((u_i + u_j)/2) ℓ_ij`.
    pub fn conformal_scale(&self, topo: &Topology, u: &[T]) -> Self {
        let half = T::c(0.5);
        let lengths = topo
            .edges()
            .iter()
            .zip(&self.lengths)
            .map(|(&[a, b], &l)| ((u[a] + u[b]) * half).exp() * l)
            .collect();
        DiscreteMetric { lengths }
    }

    pub fn corner_angles(&self, topo: &Topology, f: usize) -> Option<[T; 3]> {
        corner_angles(self.face_lengths(topo, f))
    }
}

pub fn satisfies_triangle_inequality<T: Real>(l: [T; 3]) -> bool {
    let sum = l[0] + l[1] + l[2];
    let tol = T::c(TRIANGLE_INEQUALITY_TOL) * sum;
    (0..3).all(|c| sum - l[c] - l[c] > tol) && l.iter().all(|&x| x > T::zero())
}

/// Interior angles at each corner from the opposite edge lengths, via the
/// half-angle formula `tan(α/2) = sqrt((s-b)(s-c) / (s(s-a)))`.
/// `None` if the lengths violate the triangle inequality.
pub fn corner_angles<T: Real>(l: [T; 3]) -> Option<[T; 3]> {
    if !satisfies_triangle_inequality(l) {
        return None;
    }
    Some(half_angle_formula(l))
}

fn half_angle_formula<T: Real>(l: [T; 3]) -> [T; 3] {
    let s = (l[0] + l[1] + l[2]) * T::c(0.5);
    let two = T::c(2.0);
    let d = [s - l[0], s - l[1], s - l[2]];
    [
        two * (d[1] * d[2] / (s * d[0])).sqrt().atan(),
        two * (d[2] * d[0] / (s * d[1])).sqrt().atan(),
        two * (d[0] * d[1] / (s * d[2])).sqrt().atan(),
    ]
}

/// Corner angles extended to violating lengths: the corner opposite the
/// longest edge gets π, the others 0.
pub fn corner_angles_extended<T: Real>(l: [T; 3]) -> [T; 3] {
    let s = (l[0] + l[1] + l[2]) * T::c(0.5);
    if (0..3).all(|c| s - l[c] > T::zero()) {
        return half_angle_formula(l);
    }
    let longest = (0..3).fold(0, |m, c| if l[c] > l[m] { c } else { m });
    let mut out = [T::zero(); 3];
    out[longest] = T::PI();
    out
}

/// Triangle area from edge lengths (Kahan's stable Heron formula).
pub fn area_from_lengths<T: Real>(l: [T; 3]) -> T {
    let mut s = l;
    s.sort_by(|a, b| b.partial_cmp(a).expect("finite lengths"));
    let [a, b, c] = s;
    let prod = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    if prod <= T::zero() {
        T::zero()
    } else {
        T::c(0.25) * prod.sqrt()
    }
}

/// Cotangents of the corner angles, computed as `(b² + c² - a²) / (4A)`.
pub fn corner_cotangents<T: Real>(l: [T; 3]) -> Option<[T; 3]> {
    if !satisfies_triangle_inequality(l) {
        return None;
    }
    let four_area = T::c(4.0) * area_from_lengths(l);
    let sq = l.map(|x| x * x);
    Some([
        (sq[1] + sq[2] - sq[0]) / four_area,
        (sq[2] + sq[0] - sq[1]) / four_area,
        (sq[0] + sq[1] - sq[2]) / four_area,
    ])
}

/// Cotangent Laplacian `L` with `L_ij = -(cot α + cot β)/2` over the angles
/// opposite edge `ij` and `L_ii = -Σ_j L_ij`. Angles come from the metric,
/// not from an embedding.
pub fn cotan_laplacian<T: Real>(topo: &Topology, metric: &DiscreteMetric<T>) -> Result<CsrMatrix<T>, MeshError> {
    cotan_laplacian_with(topo, metric, |_, l| corner_cotangents(l))
}

/// Variant that lets the caller decide how each face contributes (used by
/// the flattening Newton solver, which drops degenerate faces).
pub(crate) fn cotan_laplacian_with<T: Real>(
    topo: &Topology,
    metric: &DiscreteMetric<T>,
    cot: impl Fn(usize, [T; 3]) -> Option<[T; 3]>,
) -> Result<CsrMatrix<T>, MeshError> {
    let half = T::c(0.5);
    let mut trip = Vec::with_capacity(topo.n_faces() * 12);
    let mut bad = Vec::new();
    for f in 0..topo.n_faces() {
        let tri = topo.face(f);
        let Some(cots) = cot(f, metric.face_lengths(topo, f)) else {
            bad.push(f);
            continue;
        };
        for c in 0..3 {
            let (j, k) = (tri[(c + 1) % 3], tri[(c + 2) % 3]);
            let w = cots[c] * half;
            trip.push((j, k, -w));
            trip.push((k, j, -w));
            trip.push((j, j, w));
            trip.push((k, k, w));
        }
    }
    if !bad.is_empty() {
        return Err(MeshError::DegenerateFaces { faces: bad });
    }
    Ok(CsrMatrix::from_triplets(topo.n_vertices(), &trip))
}
