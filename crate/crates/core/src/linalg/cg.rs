//! Jacobi-preconditioned conjugate gradient.

use super::sparse::CsrMatrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

pub fn conjugate_gradient<T: Real>(
    m: &CsrMatrix<T>,
    b: &[T],
    rel_tol: T,
    max_iter: usize,
) -> (Vec<T>, CgReport) {
    let n = m.n();
    let inv_diag: Vec<T> = m
        .diagonal()
        .into_iter()
        .map(|d| if d > T::zero() { T::one() / d } else { T::one() })
        .collect();
    let dot = |a: &[T], b: &[T]| -> T { a.iter().zip(b).map(|(x, y)| *x * *y).sum() };

    let b_norm = dot(b, b).sqrt();
    let mut x = vec![T::zero(); n];
    if b_norm == T::zero() {
        return (x, CgReport { iterations: 0, relative_residual: 0.0, converged: true });
    }
    let mut r = b.to_vec();
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(a, d)| *a * *d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    let mut rel = T::one();
    while iterations < max_iter {
        let ap = m.mul_vec(&p);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        iterations += 1;
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= rel_tol {
            break;
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    let converged = rel <= rel_tol;
    (x, CgReport { iterations, relative_residual: rel.f64(), converged })
}
