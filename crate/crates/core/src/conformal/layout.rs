//! Planar layout of a flat disk metric by breadth-first triangle unfolding.

use std::collections::VecDeque;

use super::FlattenError;
use crate::mesh::metric::corner_angles;
use crate::mesh::{DiscreteMetric, Topology, NO_FACE};
use crate::scalar::Real;

/// Relative edge-length tolerance when validating a layout.
pub const LAYOUT_TOL: f64 = 1e-8;

pub type Point2<T> = [T; 2];

fn signed_area<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> T {
    ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])) * T::c(0.5)
}

/// Place vertices in the plane so every face keeps its metric lengths and
/// its counterclockwise orientation. Face 0 seeds the unfolding.
pub fn layout_plane<T: Real>(topo: &Topology, metric: &DiscreteMetric<T>) -> Result<Vec<Point2<T>>, FlattenError> {
    let n = topo.n_vertices();
    let mut pos: Vec<Option<Point2<T>>> = vec![None; n];
    let mut done = vec![false; topo.n_faces()];
    let angles = |f: usize| {
        corner_angles(metric.face_lengths(topo, f))
            .ok_or_else(|| FlattenError::TriangleInequality { stage: "layout", faces: vec![f] })
    };

    let seed = topo.face(0);
    let l = metric.face_lengths(topo, 0);
    let a = angles(0)?;
    // corner c's opposite edge is l[c]; edge (seed0, seed1) is opposite corner 2
    pos[seed[0]] = Some([T::zero(), T::zero()]);
    pos[seed[1]] = Some([l[2], T::zero()]);
    pos[seed[2]] = Some([l[1] * a[0].cos(), l[1] * a[0].sin()]);
    done[0] = true;

    let mut queue = VecDeque::from([0usize]);
    while let Some(f) = queue.pop_front() {
        for e in topo.face_edges(f) {
            let g = topo.edge_faces(e).into_iter().find(|&g| g != f && g != NO_FACE);
            let Some(g) = g else { continue };
            if done[g] {
                continue;
            }
            let tri = topo.face(g);
            let a_g = angles(g)?;
            let l_g = metric.face_lengths(topo, g);
            // the corner of g whose vertex is not on the shared edge
            let [ea, eb] = topo.edge(e);
            let c = (0..3).find(|&c| tri[c] != ea && tri[c] != eb).expect("third vertex");
            let (i, j, k) = (tri[(c + 1) % 3], tri[(c + 2) % 3], tri[c]);
            if pos[k].is_none() {
                let (pi, pj) = (pos[i].expect("placed"), pos[j].expect("placed"));
                let len = ((pj[0] - pi[0]).powi(2) + (pj[1] - pi[1]).powi(2)).sqrt();
                let dir = [(pj[0] - pi[0]) / len, (pj[1] - pi[1]) / len];
                // k sits to the left of i → j at angle α_i and distance ℓ_ik
                let ang = a_g[(c + 1) % 3];
                let r = l_g[(c + 2) % 3];
                let (s, co) = (ang.sin(), ang.cos());
                pos[k] = Some([pi[0] + r * (co * dir[0] - s * dir[1]), pi[1] + r * (s * dir[0] + co * dir[1])]);
            }
            done[g] = true;
            queue.push_back(g);
        }
    }

    let pos: Vec<Point2<T>> = pos
        .into_iter()
        .enumerate()
        .map(|(v, p)| p.ok_or(FlattenError::Disconnected { vertex: v }))
        .collect::<Result<_, _>>()?;

    for (e, &[a, b]) in topo.edges().iter().enumerate() {
        let d = ((pos[a][0] - pos[b][0]).powi(2) + (pos[a][1] - pos[b][1]).powi(2)).sqrt();
        let rel = ((d - metric.length(e)) / metric.length(e)).abs();
        if rel > T::c(LAYOUT_TOL) {
            return Err(FlattenError::Layout { edge: e, relative_error: rel.f64() });
        }
    }
    for f in 0..topo.n_faces() {
        let [a, b, c] = topo.face(f);
        if signed_area(pos[a], pos[b], pos[c]) <= T::zero() {
            return Err(FlattenError::LayoutOrientation { face: f });
        }
    }
    Ok(pos)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: Point2<f64>, b: Point2<f64>) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    #[test]
    fn right_triangle() {
        let topo = Topology::new(3, vec![[0, 1, 2]]).unwrap();
        let mut lengths = vec![0.0; 3];
        lengths[topo.edge_index(0, 1).unwrap()] = 3.0;
        lengths[topo.edge_index(0, 2).unwrap()] = 4.0;
        lengths[topo.edge_index(1, 2).unwrap()] = 5.0;
        let p = layout_plane(&topo, &DiscreteMetric::from_lengths(lengths)).unwrap();
        assert_eq!(p[0], [0.0, 0.0]);
        assert_eq!(p[1], [3.0, 0.0]);
        assert!(dist(p[2], [0.0, 4.0]) < 1e-14);
    }

    #[test]
    fn unit_square() {
        let topo = Topology::new(4, vec![[0, 1, 2], [0, 2, 3]]).unwrap();
        let mut lengths = vec![1.0; 5];
        lengths[topo.edge_index(0, 2).unwrap()] = 2f64.sqrt();
        let p = layout_plane(&topo, &DiscreteMetric::from_lengths(lengths)).unwrap();
        assert!(dist(p[2], [1.0, 1.0]) < 1e-14);
        assert!(dist(p[3], [0.0, 1.0]) < 1e-14);
    }

    #[test]
    fn non_flat_metric_is_rejected() {
        // pentagonal cone: closing the fan leaves a gap
        let topo = crate::mesh::generators::fan::<f64>(5).topology().clone();
        let metric = DiscreteMetric::from_lengths(vec![1.0; topo.n_edges()]);
        assert!(matches!(layout_plane(&topo, &metric), Err(FlattenError::Layout { .. })));
    }
}
