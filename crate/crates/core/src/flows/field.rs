//! Spherical vector fields from a Euclidean network: radial extension,
//! tangent projection and the exact divergence.

use ndarray::Array2;

use super::mlp::{self, MlpField};
use super::tape::{Tape, Var};
use crate::linalg::vec3::{self, Vec3};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("cannot extend a field to the zero vector")]
    ZeroVector,
}

/// Raw network value at `x/‖x‖` (with `t` appended for time-dependent nets).
pub fn extend_field<T: Real>(net: &MlpField<T>, x: Vec3<T>, t: Option<T>) -> Result<Vec3<T>, FieldError> {
    let n = vec3::norm(x);
    if n == T::zero() {
        return Err(FieldError::ZeroVector);
    }
    let mut row = vec3::scale(x, T::one() / n).to_vec();
    row.extend(t);
    let mut tape = Tape::new();
    let p = net.on_tape_const(&mut tape);
    let input = tape.constant(Array2::from_shape_vec((1, row.len()), row).expect("row"));
    let (y, _) = mlp::forward(&mut tape, &p, input, None);
    let y = tape.value(y);
    Ok([y[[0, 0]], y[[0, 1]], y[[0, 2]]])
}

/// `v − (x·v / x·x) x`.
pub fn tangent_project<T: Real>(x: Vec3<T>, v: Vec3<T>) -> Vec3<T> {
    vec3::sub(v, vec3::scale(x, vec3::dot(x, v) / vec3::dot(x, x)))
}

/// Rows of an `n × 3` array.
pub fn rows<T: Real>(points: &[Vec3<T>]) -> Array2<T> {
    Array2::from_shape_fn((points.len(), 3), |(i, k)| points[i][k])
}

pub fn to_points<T: Real>(a: &Array2<T>) -> Vec<Vec3<T>> {
    a.rows().into_iter().map(|r| [r[0], r[1], r[2]]).collect()
}

/// Projected field `v = N − x̂(x̂·N)` with `N = net(x̂, t)`, and its exact
/// Euclidean divergence
/// `div v = (Σ_k (J_N Π e_k)_k − 2 x̂·N) / ‖x‖` with `Π = I − x̂x̂ᵀ`,
/// the sum taken from three forward-mode passes along `Π e_k`. Both outputs are tape nodes (`n × 3`, `n × 1`).
pub fn field_and_divergence<T: Real>(tape: &mut Tape<T>, params: &[Var], x: Var, t: Option<T>) -> (Var, Var) {
    let n = tape.value(x).nrows();
    let sq = tape.square(x);
    let r2 = tape.row_sum(sq);
    let r = tape.sqrt(r2);
    let inv_r = tape.recip(r);
    let xh = tape.mul_col(x, inv_r);
    let time_col = t.map(|t| tape.constant(Array2::from_elem((n, 1), t)));
    let input = match time_col {
        Some(c) => tape.concat_cols(&[xh, c]),
        None => xh,
    };
    let zero_col = t.map(|_| tape.constant(Array2::zeros((n, 1))));
    let mut blocks = Vec::with_capacity(3);
    for k in 0..3 {
        let e = tape.constant(Array2::from_shape_fn((n, 3), |(_, j)| if j == k { T::one() } else { T::zero() }));
        let xk = tape.slice_cols(xh, k, 1);
        let radial = tape.mul_col(xh, xk);
        let d = tape.sub(e, radial);
        blocks.push(match zero_col {
            Some(z) => tape.concat_cols(&[d, z]),
            None => d,
        });
    }
    let tangents = tape.vstack(&blocks);
    let (out, dout) = mlp::forward(tape, params, input, Some((tangents, 3)));
    let dout = dout.expect("tangents requested");
    let mut trace = None;
    for k in 0..3 {
        let block = tape.slice_rows(dout, k * n, n);
        let col = tape.slice_cols(block, k, 1);
        trace = Some(match trace {
            Some(acc) => tape.add(acc, col),
            None => col,
        });
    }
    let xn = tape.mul(xh, out);
    let xn = tape.row_sum(xn);
    let two_xn = tape.scale(xn, T::c(2.0));
    let div = tape.sub(trace.expect("three blocks"), two_xn);
    let div = tape.mul_col(div, inv_r);
    let radial = tape.mul_col(xh, xn);
    let v = tape.sub(out, radial);
    (v, div)
}

/// Field values and divergences at a batch of points (no gradients).
pub fn evaluate_field<T: Real>(net: &MlpField<T>, points: &[Vec3<T>], t: Option<T>) -> (Vec<Vec3<T>>, Vec<T>) {
    let mut tape = Tape::new();
    let p = net.on_tape_const(&mut tape);
    let x = tape.constant(rows(points));
    let (v, div) = field_and_divergence(&mut tape, &p, x, t);
    (to_points(tape.value(v)), tape.value(div).column(0).to_vec())
}
