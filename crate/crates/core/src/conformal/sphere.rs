//! Sphere-side steps of the parameterization: stereographic projection,
//! reinsertion of the removed vertex and Möbius centering. Every map here
//! is a discrete conformal equivalence and reports its log conformal
//! increment per vertex.

use super::FlattenError;
use crate::linalg::vec3::{self, Mat3, Vec3};
use crate::scalar::Real;

/// Inverse stereographic projection through the north pole,
/// `σ(p) = (2p_x, 2p_y, |p|² − 1)/(|p|² + 1)`, with increment
/// `−log((|p|² + 1)/2)`.
pub fn stereographic_to_sphere<T: Real>(p: &[[T; 2]]) -> (Vec<Vec3<T>>, Vec<T>) {
    let two = T::c(2.0);
    p.iter()
        .map(|&[x, y]| {
            let r2 = x * x + y * y;
            let d = r2 + T::one();
            ([two * x / d, two * y / d, (r2 - T::one()) / d], -(d / two).ln())
        })
        .unzip()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MobiusOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MobiusOptions {
    fn default() -> Self {
        MobiusOptions { tolerance: 1e-6, max_iterations: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MobiusReport {
    pub iterations: usize,
    /// Weighted center norm after every accepted iteration, starting with the input.
    pub center_norms: Vec<f64>,
}

pub fn weighted_center<T: Real>(x: &[Vec3<T>], w: &[T]) -> Vec3<T> {
    let total: T = w.iter().copied().sum();
    let mut c = [T::zero(); 3];
    for (p, &wi) in x.iter().zip(w) {
        c = vec3::add(c, vec3::scale(*p, wi));
    }
    vec3::scale(c, T::one() / total)
}

/// Sphere-preserving Möbius map `φ_a(x) = (1 − |a|²)(x − a)/|x − a|² − a`
/// for `|a| < 1`, with its log conformal increment `log((1 − |a|²)/|x − a|²)`.
/// Points near `a` spread out, so the center moves away from `a`.
pub fn mobius_map<T: Real>(a: Vec3<T>, x: Vec3<T>) -> (Vec3<T>, T) {
    let k = T::one() - vec3::dot(a, a);
    let d = vec3::sub(x, a);
    let d2 = vec3::dot(d, d);
    let y = vec3::sub(vec3::scale(d, k / d2), a);
    (vec3::normalize(y), (k / d2).ln())
}

/// Drive the weighted center of unit vectors to the origin with Möbius maps.
/// Each step solves the linearized centering condition, then halves the
/// step until the center norm strictly decreases.
pub fn mobius_center<T: Real>(
    x: &[Vec3<T>],
    w: &[T],
    opts: &MobiusOptions,
) -> Result<(Vec<Vec3<T>>, Vec<T>, MobiusReport), FlattenError> {
    let mut x = x.to_vec();
    let mut u = vec![T::zero(); x.len()];
    let total: T = w.iter().copied().sum();
    let tol = T::c(opts.tolerance);
    let mut c = weighted_center(&x, w);
    let mut norms = vec![vec3::norm(c).f64()];
    let mut iterations = 0;
    while vec3::norm(c) > tol {
        if iterations == opts.max_iterations {
            return Err(FlattenError::Mobius { iterations, center_norm: vec3::norm(c).f64() });
        }
        iterations += 1;
        // φ_a(x) ≈ x − 2a + 2(x·a)x, so the center moves to c − 2(I − M)a
        let mut m: Mat3<T> = vec3::identity();
        for (p, &wi) in x.iter().zip(w) {
            for r in 0..3 {
                for s in 0..3 {
                    m[r][s] -= wi * p[r] * p[s] / total;
                }
            }
        }
        let mut a = vec3::scale(vec3::solve3(&m, c).unwrap_or(c), T::c(0.5));
        let na = vec3::norm(a);
        if na >= T::c(0.9) {
            a = vec3::scale(a, T::c(0.9) / na);
        }
        let mut accepted = None;
        for _ in 0..60 {
            let (y, du): (Vec<_>, Vec<_>) = x.iter().map(|&p| mobius_map(a, p)).unzip();
            let cy = weighted_center(&y, w);
            if vec3::norm(cy) < vec3::norm(c) {
                accepted = Some((y, du, cy));
                break;
            }
            a = vec3::scale(a, T::c(0.5));
        }
        let Some((y, du, cy)) = accepted else {
            return Err(FlattenError::Mobius { iterations, center_norm: vec3::norm(c).f64() });
        };
        x = y;
        for (ui, d) in u.iter_mut().zip(du) {
            *ui += d;
        }
        c = cy;
        norms.push(vec3::norm(c).f64());
    }
    Ok((x, u, MobiusReport { iterations, center_norms: norms }))
}
