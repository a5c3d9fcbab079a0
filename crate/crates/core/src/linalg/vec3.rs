//! Small fixed-size vector helpers on `[T; 3]`.

use crate::scalar::Real;

pub type Vec3<T> = [T; 3];

#[inline]
pub fn add<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<T: Real>(a: Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm<T: Real>(a: Vec3<T>) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn normalize<T: Real>(a: Vec3<T>) -> Vec3<T> {
    scale(a, T::one() / norm(a))
}

/// Scalar triple product `(a × b) · c`.
#[inline]
pub fn det<T: Real>(a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> T {
    dot(cross(a, b), c)
}

#[inline]
pub fn dist<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    norm(sub(a, b))
}

/// Weighted combination `Σ w_k p_k` of three points.
#[inline]
pub fn combine<T: Real>(p: [Vec3<T>; 3], w: [T; 3]) -> Vec3<T> {
    let mut out = [T::zero(); 3];
    for (pk, wk) in p.iter().zip(w) {
        for d in 0..3 {
            out[d] += pk[d] * wk;
        }
    }
    out
}

/// Any unit vector orthogonal to the unit vector `a`.
pub fn orthogonal<T: Real>(a: Vec3<T>) -> Vec3<T> {
    let pick = if a[0].abs() < T::c(0.9) {
        [T::one(), T::zero(), T::zero()]
    } else {
        [T::zero(), T::one(), T::zero()]
    };
    normalize(cross(a, pick))
}

/// Row-major 3×3 matrix.
pub type Mat3<T> = [[T; 3]; 3];

pub fn mat_vec<T: Real>(m: &Mat3<T>, v: Vec3<T>) -> Vec3<T> {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

pub fn mat_t_vec<T: Real>(m: &Mat3<T>, v: Vec3<T>) -> Vec3<T> {
    let mut out = [T::zero(); 3];
    for r in 0..3 {
        for c in 0..3 {
            out[c] += m[r][c] * v[r];
        }
    }
    out
}

pub fn mat_mul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

pub fn transpose<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    let mut out = *a;
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = a[c][r];
        }
    }
    out
}

pub fn identity<T: Real>() -> Mat3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for (k, row) in out.iter_mut().enumerate() {
        row[k] = T::one();
    }
    out
}

pub fn mat_det<T: Real>(m: &Mat3<T>) -> T {
    det(m[0], m[1], m[2])
}

/// Symmetric 3×3 solve by Cramer's rule; `None` if singular.
pub fn solve3<T: Real>(m: &Mat3<T>, b: Vec3<T>) -> Option<Vec3<T>> {
    let d = mat_det(m);
    if d.abs() <= T::epsilon() {
        return None;
    }
    let col = |k: usize| [m[0][k], m[1][k], m[2][k]];
    let (c0, c1, c2) = (col(0), col(1), col(2));
    Some([
        det(b, c1, c2) / d,
        det(c0, b, c2) / d,
        det(c0, c1, b) / d,
    ])
}
