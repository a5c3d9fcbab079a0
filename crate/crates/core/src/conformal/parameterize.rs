//! End-to-end spherical parameterization of a genus-0 mesh.

use serde::{Deserialize, Serialize};

use super::flatten::{flatten_disk, FlattenOptions};
use super::layout::layout_plane;
use super::sphere::{mobius_center, stereographic_to_sphere, weighted_center, MobiusOptions};
use super::FlattenError;
use crate::linalg::vec3::{self, Vec3};
use crate::mesh::geometry::vertex_area_weights;
use crate::mesh::{DiscreteMetric, Topology, TriangleMesh};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterizeOptions {
    /// Vertex removed before flattening; see [`default_removed_vertex`].
    pub removed_vertex: Option<usize>,
    pub flatten: FlattenOptions,
    pub mobius: MobiusOptions,
}

/// Log conformal increment contributed by one stage, per vertex of the
/// full mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageIncrement<T> {
    pub stage: String,
    pub u: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub newton_iterations: usize,
    pub max_angle_defect: f64,
    pub flatten_energies: Vec<f64>,
    pub mobius_iterations: usize,
    pub center_norm: f64,
    /// Largest per-edge `|log ℓ̃ − (u_i+u_j)/2 − log ℓ|`.
    pub max_conformal_residual: f64,
    /// Same residual restricted to edges at the removed vertex, measured
    /// right after reinsertion.
    pub reinsertion_residual: f64,
    pub max_unit_deviation: f64,
}

/// Unit-sphere embedding `f̃` conformally equivalent to the source mesh,
/// with its total log conformal factor `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalParameterization<T> {
    pub removed_vertex: usize,
    pub positions: Vec<Vec3<T>>,
    pub u: Vec<T>,
    pub stages: Vec<StageIncrement<T>>,
    pub report: ConvergenceReport,
}

impl<T: Real> SphericalParameterization<T> {
    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    /// The inscribed mesh: source connectivity on the sphere positions.
    pub fn inscribed_mesh(&self, source: &TriangleMesh<T>) -> TriangleMesh<T> {
        source.with_positions(self.positions.clone())
    }

    /// Per-edge residual of the discrete conformal equivalence with the
    /// source metric.
    pub fn conformal_residuals(&self, source: &TriangleMesh<T>) -> Vec<T> {
        conformal_residuals(source, &self.positions, &self.u)
    }
}

pub fn conformal_residuals<T: Real>(source: &TriangleMesh<T>, x: &[Vec3<T>], u: &[T]) -> Vec<T> {
    let p = source.positions();
    let half = T::c(0.5);
    source
        .topology()
        .edges()
        .iter()
        .map(|&[a, b]| (vec3::dist(x[a], x[b]).ln() - (u[a] + u[b]) * half - vec3::dist(p[a], p[b]).ln()).abs())
        .collect()
}

/// Make every neighbor of `center` equidistant from it: `u_j = 2 log(c/ℓ_j)`
/// with `c` the geometric mean of the incident lengths, `u_center = 0`.
pub fn normalize_neighborhood<T: Real>(
    topo: &Topology,
    metric: &DiscreteMetric<T>,
    center: usize,
) -> Result<(Vec<T>, DiscreteMetric<T>), FlattenError> {
    let nbrs = topo.neighbors(center);
    if nbrs.len() < 3 {
        return Err(FlattenError::Degree { vertex: center, degree: nbrs.len() });
    }
    let log_len: Vec<T> =
        nbrs.iter().map(|&j| metric.length(topo.edge_index(center, j).expect("incident edge")).ln()).collect();
    let log_c = log_len.iter().copied().sum::<T>() / T::of_usize(nbrs.len());
    let mut u = vec![T::zero(); topo.n_vertices()];
    for (&j, &l) in nbrs.iter().zip(&log_len) {
        u[j] = T::c(2.0) * (log_c - l);
    }
    let scaled = metric.conformal_scale(topo, &u);
    let bad = scaled.degenerate_faces(topo);
    if !bad.is_empty() {
        return Err(FlattenError::TriangleInequality { stage: "neighborhood normalization", faces: bad });
    }
    Ok((u, scaled))
}

/// The disk left after deleting `removed` and its incident faces, with
/// `old_ids[new] = old`.
pub struct Punctured {
    pub topology: Topology,
    pub old_ids: Vec<usize>,
    /// Edge id in the full mesh for every disk edge.
    pub old_edges: Vec<usize>,
}

pub fn puncture(topo: &Topology, removed: usize) -> Punctured {
    let old_ids: Vec<usize> = (0..topo.n_vertices()).filter(|&v| v != removed).collect();
    let new_id = |v: usize| if v < removed { v } else { v - 1 };
    let faces: Vec<[usize; 3]> =
        topo.faces().iter().filter(|t| !t.contains(&removed)).map(|t| t.map(new_id)).collect();
    let topology = Topology::new(old_ids.len(), faces).expect("sub-mesh of a valid mesh");
    let old_edges = topology
        .edges()
        .iter()
        .map(|&[a, b]| topo.edge_index(old_ids[a], old_ids[b]).expect("edge of the full mesh"))
        .collect();
    Punctured { topology, old_ids, old_edges }
}

/// Default removed vertex: highest degree; among those, the one whose
/// incident edge lengths are most uniform (smallest log spread), then the
/// lowest id.
pub fn default_removed_vertex<T: Real>(topo: &Topology, metric: &DiscreteMetric<T>) -> usize {
    let max_deg = (0..topo.n_vertices()).map(|v| topo.degree(v)).max().unwrap_or(0);
    let spread = |v: usize| {
        let logs = topo.neighbors(v).into_iter().map(|j| metric.length(topo.edge_index(v, j).expect("edge")).ln());
        let (lo, hi) = logs.fold((T::infinity(), T::neg_infinity()), |(lo, hi), l| (lo.min(l), hi.max(l)));
        hi - lo
    };
    let mut best: Option<(usize, T)> = None;
    for v in (0..topo.n_vertices()).filter(|&v| topo.degree(v) == max_deg) {
        let s = spread(v);
        if best.is_none_or(|(_, b)| s < b) {
            best = Some((v, s));
        }
    }
    best.map_or(0, |(v, _)| v)
}

/// Conformally map a topological sphere to the unit sphere.
pub fn spherical_parameterize<T: Real>(
    mesh: &TriangleMesh<T>,
    opts: &ParameterizeOptions,
) -> Result<SphericalParameterization<T>, FlattenError> {
    let topo = mesh.topology();
    if !topo.is_topological_sphere() {
        return Err(FlattenError::NotTopologicalSphere {
            euler_characteristic: topo.euler_characteristic(),
            has_boundary: topo.has_boundary(),
        });
    }
    let n = topo.n_vertices();
    let metric = DiscreteMetric::from_mesh(mesh)?;
    let removed = opts.removed_vertex.unwrap_or_else(|| default_removed_vertex(topo, &metric));
    if removed >= n {
        return Err(FlattenError::Degree { vertex: removed, degree: 0 });
    }
    let mut stages = Vec::new();

    let (u_norm, normalized) = normalize_neighborhood(topo, &metric, removed)?;
    stages.push(StageIncrement { stage: "normalize_neighborhood".into(), u: u_norm });

    let disk = puncture(topo, removed);
    let disk_metric = DiscreteMetric::from_lengths(disk.old_edges.iter().map(|&e| normalized.length(e)).collect());
    let flat = flatten_disk(&disk.topology, &disk_metric, &opts.flatten)?;
    stages.push(StageIncrement { stage: "flatten".into(), u: lift(&flat.u, &disk.old_ids, n) });

    let mut plane = layout_plane(&disk.topology, &flat.metric)?;
    let s = normalize_plane(&mut plane);
    stages.push(StageIncrement { stage: "planar_scale".into(), u: lift(&vec![s.ln(); plane.len()], &disk.old_ids, n) });

    let (on_sphere, u_stereo) = stereographic_to_sphere(&plane);
    stages.push(StageIncrement { stage: "stereographic".into(), u: lift(&u_stereo, &disk.old_ids, n) });

    let mut x = vec![[T::zero(), T::zero(), T::one()]; n];
    for (k, &old) in disk.old_ids.iter().enumerate() {
        x[old] = on_sphere[k];
    }
    let mut u = sum_stages(&stages, n);
    let u_star = reinsert_vertex(mesh, &x, &u, removed)?;
    let mut u_re = vec![T::zero(); n];
    u_re[removed] = u_star;
    u[removed] += u_star;
    stages.push(StageIncrement { stage: "reinsert".into(), u: u_re });
    let reinsertion_residual = topo
        .neighbors(removed)
        .into_iter()
        .map(|j| {
            let l = vec3::dist(mesh.position(removed), mesh.position(j));
            (vec3::dist(x[removed], x[j]).ln() - (u[removed] + u[j]) * T::c(0.5) - l.ln()).abs()
        })
        .fold(T::zero(), T::max);

    let weights = vertex_area_weights(mesh);
    let (x, u_mob, mob) = mobius_center(&x, &weights, &opts.mobius)?;
    stages.push(StageIncrement { stage: "mobius".into(), u: u_mob });
    let u = sum_stages(&stages, n);

    for (f, &[i, j, k]) in topo.faces().iter().enumerate() {
        if vec3::det(x[i], x[j], x[k]) <= T::zero() {
            return Err(FlattenError::InscribedOrientation { face: f });
        }
    }
    let residual = conformal_residuals(mesh, &x, &u).into_iter().fold(T::zero(), T::max);
    let unit = x.iter().map(|p| (vec3::norm(*p) - T::one()).abs()).fold(T::zero(), T::max);
    let report = ConvergenceReport {
        newton_iterations: flat.report.iterations,
        max_angle_defect: flat.report.max_defect,
        flatten_energies: flat.report.energies,
        mobius_iterations: mob.iterations,
        center_norm: vec3::norm(weighted_center(&x, &weights)).f64(),
        max_conformal_residual: residual.f64(),
        reinsertion_residual: reinsertion_residual.f64(),
        max_unit_deviation: unit.f64(),
    };
    Ok(SphericalParameterization { removed_vertex: removed, positions: x, u, stages, report })
}

fn lift<T: Real>(disk_values: &[T], old_ids: &[usize], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for (k, &old) in old_ids.iter().enumerate() {
        out[old] = disk_values[k];
    }
    out
}

fn sum_stages<T: Real>(stages: &[StageIncrement<T>], n: usize) -> Vec<T> {
    let mut u = vec![T::zero(); n];
    for st in stages {
        for (a, &b) in u.iter_mut().zip(&st.u) {
            *a += b;
        }
    }
    u
}

/// Center the layout at its vertex centroid, scale to unit RMS radius and
/// reflect `y` (stereographic projection through the north pole reverses
/// orientation). Returns the scale factor.
fn normalize_plane<T: Real>(p: &mut [[T; 2]]) -> T {
    let n = T::of_usize(p.len());
    let cx = p.iter().map(|q| q[0]).sum::<T>() / n;
    let cy = p.iter().map(|q| q[1]).sum::<T>() / n;
    let rms = (p.iter().map(|q| (q[0] - cx).powi(2) + (q[1] - cy).powi(2)).sum::<T>() / n).sqrt();
    let s = T::one() / rms;
    for q in p.iter_mut() {
        *q = [(q[0] - cx) * s, -(q[1] - cy) * s];
    }
    s
}

/// Log conformal factor for the removed vertex at the north pole: the mean
/// over its incident edges of `2(log ℓ̃ − log ℓ) − u_j`. Incident faces must
/// stay positively oriented.
pub fn reinsert_vertex<T: Real>(mesh: &TriangleMesh<T>, x: &[Vec3<T>], u: &[T], removed: usize) -> Result<T, FlattenError> {
    let topo = mesh.topology();
    for &f in topo.vertex_faces(removed) {
        let [i, j, k] = topo.face(f);
        if vec3::det(x[i], x[j], x[k]) <= T::zero() {
            return Err(FlattenError::DegenerateReinsertion { face: f });
        }
    }
    let nbrs = topo.neighbors(removed);
    let two = T::c(2.0);
    let sum: T = nbrs
        .iter()
        .map(|&j| {
            let l = vec3::dist(mesh.position(removed), mesh.position(j));
            two * (vec3::dist(x[removed], x[j]).ln() - l.ln()) - u[j]
        })
        .sum();
    Ok(sum / T::of_usize(nbrs.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generators;

    #[test]
    fn normalize_neighborhood_equalizes_spokes() {
        let m = generators::blob(&generators::icosahedron::<f64>(), 0.3, 1.4);
        let metric = DiscreteMetric::from_mesh(&m).unwrap();
        let topo = m.topology();
        let (u, scaled) = normalize_neighborhood(topo, &metric, 0).unwrap();
        let nbrs = topo.neighbors(0);
        let ls: Vec<f64> = nbrs.iter().map(|&j| scaled.length(topo.edge_index(0, j).unwrap())).collect();
        let gm = nbrs.iter().map(|&j| metric.length(topo.edge_index(0, j).unwrap()).ln()).sum::<f64>() / 5.0;
        for l in &ls {
            assert!((l - gm.exp()).abs() < 1e-12);
        }
        assert_eq!(u[0], 0.0);
        for v in 0..12 {
            if !nbrs.contains(&v) {
                assert_eq!(u[v], 0.0);
            }
        }
    }

    #[test]
    fn equal_spokes_give_zero_increment() {
        let m = generators::icosahedron::<f64>();
        let metric = DiscreteMetric::from_mesh(&m).unwrap();
        let (u, _) = normalize_neighborhood(m.topology(), &metric, 3).unwrap();
        assert!(u.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn puncture_leaves_a_disk() {
        let m = generators::icosahedron::<f64>();
        let d = puncture(m.topology(), 4);
        assert_eq!(d.topology.euler_characteristic(), 1);
        assert_eq!(d.topology.n_faces(), 15);
        assert_eq!(d.topology.boundary_edges().count(), 5);
    }

    #[test]
    fn torus_is_rejected() {
        let t = generators::torus::<f64>(8, 8, 2.0, 0.7);
        assert!(matches!(
            spherical_parameterize(&t, &ParameterizeOptions::default()),
            Err(FlattenError::NotTopologicalSphere { euler_characteristic: 0, .. })
        ));
    }

    #[test]
    fn stages_sum_to_total() {
        let m = generators::blob(&generators::geodesic_sphere::<f64>(1), 0.25, 1.3);
        let p = spherical_parameterize(&m, &ParameterizeOptions::default()).unwrap();
        let total = sum_stages(&p.stages, m.n_vertices());
        for (a, b) in total.iter().zip(&p.u) {
            assert_eq!(a, b);
        }
        assert!(p.report.max_conformal_residual <= 1e-6);
        assert!(p.report.reinsertion_residual <= 1e-9);
    }
}
