//! Flattening a disk by convex Newton minimization over log conformal
//! factors. Boundary vertices are pinned at `u = 0`; the gradient is the
//! interior angle-sum defect and the Hessian is the cotangent Laplacian of
//! the current metric.

use super::lobachevsky::lobachevsky;
use super::FlattenError;
use crate::linalg::{solve_spd, CsrMatrix};
use crate::mesh::metric::{corner_angles_extended, corner_cotangents, cotan_laplacian_with};
use crate::mesh::{DiscreteMetric, Topology};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FlattenOptions {
    pub max_iterations: usize,
    /// Max-norm of the interior angle defect at convergence.
    pub tolerance: f64,
}

impl Default for FlattenOptions {
    fn default() -> Self {
        FlattenOptions { max_iterations: 200, tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FlattenReport {
    /// Newton steps taken; 0 when the input is already flat.
    pub iterations: usize,
    pub max_defect: f64,
    /// Energy at every iterate, starting with the input.
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FlattenResult<T> {
    pub u: Vec<T>,
    pub metric: DiscreteMetric<T>,
    pub report: FlattenReport,
}

const ARMIJO_C1: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
/// Extra full Newton steps taken after convergence, kept while they lower
/// the max defect. The planar layout accumulates defects along its
/// unfolding paths.
const POLISH_STEPS: usize = 3;

/// Sum of corner angles at every vertex, using the extended angles for
/// faces that violate the triangle inequality.
pub fn angle_sums<T: Real>(topo: &Topology, metric: &DiscreteMetric<T>) -> Vec<T> {
    let mut sums = vec![T::zero(); topo.n_vertices()];
    for f in 0..topo.n_faces() {
        let a = corner_angles_extended(metric.face_lengths(topo, f));
        for (c, &v) in topo.face(f).iter().enumerate() {
            sums[v] += a[c];
        }
    }
    sums
}

/// `2π − Σα` at interior vertices of the rescaled metric; zero on the boundary.
pub fn angle_defects<T: Real>(topo: &Topology, metric: &DiscreteMetric<T>, u: &[T]) -> Vec<T> {
    let scaled = metric.conformal_scale(topo, u);
    let boundary = topo.boundary_vertices();
    let two_pi = T::c(2.0 * std::f64::consts::PI);
    angle_sums(topo, &scaled)
        .into_iter()
        .zip(boundary)
        .map(|(s, b)| if b { T::zero() } else { two_pi - s })
        .collect()
}

/// Convex energy whose gradient with respect to interior `u` is the angle
/// defect. Returns the energy and the sum of absolute per-face terms, which
/// bounds its rounding error.
pub fn flatten_energy<T: Real>(topo: &Topology, metric: &DiscreteMetric<T>, u: &[T]) -> (T, T) {
    let scaled = metric.conformal_scale(topo, u);
    let boundary = topo.boundary_vertices();
    let two = T::c(2.0);
    let pi = T::PI();
    let mut e = T::zero();
    let mut scale = T::zero();
    for f in 0..topo.n_faces() {
        let l = scaled.face_lengths(topo, f);
        let a = corner_angles_extended(l);
        let tri = topo.face(f);
        let mut term = -pi * (u[tri[0]] + u[tri[1]] + u[tri[2]]);
        for c in 0..3 {
            term += a[c] * two * l[c].ln() + two * lobachevsky(a[c]);
        }
        e += term;
        scale += term.abs();
    }
    for (v, &b) in boundary.iter().enumerate() {
        if !b {
            let t = two * pi * u[v];
            e += t;
            scale += t.abs();
        }
    }
    (e, scale)
}

/// Hessian of [`flatten_energy`]: cotangent Laplacian of the rescaled metric,
/// with degenerate faces contributing nothing.
pub fn flatten_hessian<T: Real>(topo: &Topology, metric: &DiscreteMetric<T>, u: &[T]) -> CsrMatrix<T> {
    let scaled = metric.conformal_scale(topo, u);
    cotan_laplacian_with(topo, &scaled, |_, l| Some(corner_cotangents(l).unwrap_or([T::zero(); 3])))
        .expect("every face contributes")
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn norm2<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Find `u` (zero on the boundary) making the disk metric flat at every
/// interior vertex.
pub fn flatten_disk<T: Real>(
    topo: &Topology,
    metric: &DiscreteMetric<T>,
    opts: &FlattenOptions,
) -> Result<FlattenResult<T>, FlattenError> {
    if topo.euler_characteristic() != 1 || !topo.has_boundary() {
        return Err(FlattenError::NotDisk { euler_characteristic: topo.euler_characteristic() });
    }
    let n = topo.n_vertices();
    let boundary = topo.boundary_vertices();
    let free: Vec<usize> = (0..n).filter(|&v| !boundary[v]).collect();
    let tol = T::c(opts.tolerance);
    let mut u = vec![T::zero(); n];
    let mut defects = angle_defects(topo, metric, &u);
    let (mut energy, _) = flatten_energy(topo, metric, &u);
    let mut energies = vec![energy.f64()];
    let mut iterations = 0;

    while max_abs(&defects) > tol {
        if iterations == opts.max_iterations {
            return Err(FlattenError::DidNotConverge { iterations, max_defect: max_abs(&defects).f64() });
        }
        iterations += 1;
        let h = flatten_hessian(topo, metric, &u).principal_submatrix(&free);
        // the gradient is the defect itself
        let rhs: Vec<T> = free.iter().map(|&v| -defects[v]).collect();
        let d = solve_spd(&h, &rhs)?;
        let slope = -rhs.iter().zip(&d).map(|(&g, &di)| g * di).sum::<T>();
        let grad_norm = norm2(&defects);

        let mut t = T::one();
        loop {
            let mut trial = u.clone();
            for (k, &v) in free.iter().enumerate() {
                trial[v] += t * d[k];
            }
            let (e_trial, scale) = flatten_energy(topo, metric, &trial);
            let predicted = T::c(ARMIJO_C1) * t * slope;
            let armijo = e_trial <= energy + predicted;
            // once the predicted decrease drops below the energy's rounding
            // error, fall back to decrease of the gradient norm
            let roundoff = -t * slope < T::c(1e3) * T::epsilon() * scale;
            let trial_defects = angle_defects(topo, metric, &trial);
            if armijo || (roundoff && norm2(&trial_defects) < grad_norm) {
                u = trial;
                defects = trial_defects;
                energy = e_trial;
                energies.push(energy.f64());
                break;
            }
            t *= T::c(0.5);
            if t < T::c(MIN_STEP) {
                return Err(FlattenError::LineSearch { iteration: iterations, max_defect: max_abs(&defects).f64() });
            }
        }
    }

    for _ in 0..POLISH_STEPS {
        let current = max_abs(&defects);
        if current == T::zero() {
            break;
        }
        let h = flatten_hessian(topo, metric, &u).principal_submatrix(&free);
        let rhs: Vec<T> = free.iter().map(|&v| -defects[v]).collect();
        let Ok(d) = solve_spd(&h, &rhs) else { break };
        let mut trial = u.clone();
        for (k, &v) in free.iter().enumerate() {
            trial[v] += d[k];
        }
        let trial_defects = angle_defects(topo, metric, &trial);
        if !(max_abs(&trial_defects) < current) {
            break;
        }
        u = trial;
        defects = trial_defects;
    }

    let flat = metric.conformal_scale(topo, &u);
    let bad = flat.degenerate_faces(topo);
    if !bad.is_empty() {
        return Err(FlattenError::TriangleInequality { stage: "flattening", faces: bad });
    }
    Ok(FlattenResult {
        u,
        metric: flat,
        report: FlattenReport { iterations, max_defect: max_abs(&defects).f64(), energies },
    })
}
