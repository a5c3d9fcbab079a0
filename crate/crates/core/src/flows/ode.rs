//! Explicit Runge–Kutta integration of the augmented state `(x, a)` with
//! `x` an `n × 3` batch of points and `a` an `n × 1` accumulator, on the tape.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Solver {
    /// Dormand–Prince 5(4) with a batch-wide error norm.
    Adaptive { rtol: f64, atol: f64 },
    /// Classical fourth-order Runge–Kutta with a fixed step count.
    Rk4 { steps: usize },
}

impl Default for Solver {
    fn default() -> Self {
        Solver::Adaptive { rtol: 1e-5, atol: 1e-5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest `|‖x‖ − 1|` seen after any accepted step, before renormalizing.
    pub max_drift: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("trajectory left the sphere: drift {drift:e} exceeds {limit:e}")]
    Drift { drift: f64, limit: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("Moser denominator {value:e} fell below {eps:e}")]
    Denominator { value: f64, eps: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub solver: Solver,
    /// Keep every accepted step on the tape for differentiation. When false
    /// the tape is cut back to its entry length after each step.
    pub keep_graph: bool,
    pub drift_limit: f64,
    /// Project `x` back to the unit sphere after every step.
    pub renormalize_each_step: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { solver: Solver::default(), keep_graph: false, drift_limit: 1e-3, renormalize_each_step: false }
    }
}

/// Right-hand side: `(dx/dt, da/dt)` at time `t`.
pub trait Dynamics<T: Real> {
    fn eval(&mut self, tape: &mut Tape<T>, t: T, x: Var) -> Result<(Var, Var), OdeError>;
}

impl<T: Real, F: FnMut(&mut Tape<T>, T, Var) -> Result<(Var, Var), OdeError>> Dynamics<T> for F {
    fn eval(&mut self, tape: &mut Tape<T>, t: T, x: Var) -> Result<(Var, Var), OdeError> {
        self(tape, t, x)
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 7] = [
    &[],
    &[0.2],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth minus fourth order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// `y + h Σ c_j k_j` on the tape, skipping zero coefficients.
fn lincomb<T: Real>(tape: &mut Tape<T>, y: Var, h: f64, terms: &[(f64, Var)]) -> Var {
    let mut acc: Option<Var> = None;
    for &(c, k) in terms {
        if c == 0.0 {
            continue;
        }
        let s = tape.scale(k, T::c(h * c));
        acc = Some(match acc {
            Some(a) => tape.add(a, s),
            None => s,
        });
    }
    match acc {
        Some(a) => tape.add(y, a),
        None => y,
    }
}

fn renormalize<T: Real>(tape: &mut Tape<T>, x: Var) -> Var {
    let sq = tape.square(x);
    let r2 = tape.row_sum(sq);
    let r = tape.sqrt(r2);
    let inv = tape.recip(r);
    tape.mul_col(x, inv)
}

fn drift<T: Real>(x: &Array2<T>) -> f64 {
    x.rows().into_iter().map(|r| (r.iter().map(|v| v.f64() * v.f64()).sum::<f64>().sqrt() - 1.0).abs()).fold(0.0, f64::max)
}

fn all_finite<T: Real>(a: &Array2<T>) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Integrates from `t0` to `t1` (either direction) starting at `x0` with
/// `a = 0`. Returns the final `(x, a)` nodes; `x` is renormalized to the
/// unit sphere at the end.
pub fn integrate<T: Real>(
    tape: &mut Tape<T>,
    f: &mut impl Dynamics<T>,
    x0: Var,
    t0: f64,
    t1: f64,
    opts: &IntegrateOptions,
) -> Result<(Var, Var, OdeStats), OdeError> {
    let n = tape.value(x0).nrows();
    let base = tape.len();
    let mut x = x0;
    let mut a = tape.constant(Array2::zeros((n, 1)));
    let mut stats = OdeStats::default();
    let check = |tape: &Tape<T>, x: Var, t: f64, stats: &mut OdeStats| -> Result<(), OdeError> {
        if !all_finite(tape.value(x)) {
            return Err(OdeError::NonFinite { t });
        }
        let d = drift(tape.value(x));
        stats.max_drift = stats.max_drift.max(d);
        if d > opts.drift_limit {
            return Err(OdeError::Drift { drift: d, limit: opts.drift_limit });
        }
        Ok(())
    };
    // cut the tape back, re-entering the given nodes as constants
    let reset = |tape: &mut Tape<T>, keep: &mut [&mut Var]| {
        if opts.keep_graph {
            return;
        }
        let vals: Vec<Array2<T>> = keep.iter().map(|v| tape.value(**v).clone()).collect();
        tape.truncate(base);
        for (v, val) in keep.iter_mut().zip(vals) {
            **v = tape.constant(val);
        }
    };
    match opts.solver {
        Solver::Rk4 { steps } => {
            let steps = steps.max(1);
            let h = (t1 - t0) / steps as f64;
            for s in 0..steps {
                let t = t0 + s as f64 * h;
                let (k1x, k1a) = f.eval(tape, T::c(t), x)?;
                let y = lincomb(tape, x, h, &[(0.5, k1x)]);
                let (k2x, k2a) = f.eval(tape, T::c(t + 0.5 * h), y)?;
                let y = lincomb(tape, x, h, &[(0.5, k2x)]);
                let (k3x, k3a) = f.eval(tape, T::c(t + 0.5 * h), y)?;
                let y = lincomb(tape, x, h, &[(1.0, k3x)]);
                let (k4x, k4a) = f.eval(tape, T::c(t + h), y)?;
                let w = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];
                x = lincomb(tape, x, h, &[(w[0], k1x), (w[1], k2x), (w[2], k3x), (w[3], k4x)]);
                a = lincomb(tape, a, h, &[(w[0], k1a), (w[1], k2a), (w[2], k3a), (w[3], k4a)]);
                check(tape, x, t + h, &mut stats)?;
                if opts.renormalize_each_step {
                    x = renormalize(tape, x);
                }
                stats.accepted += 1;
                reset(tape, &mut [&mut x, &mut a]);
            }
        }
        Solver::Adaptive { rtol, atol } => {
            let span = t1 - t0;
            let dir = span.signum();
            let mut t = t0;
            let mut h = span;
            let (mut k1x, mut k1a) = f.eval(tape, T::c(t), x)?;
            while (t1 - t) * dir > 0.0 {
                if h.abs() < 1e-12 * span.abs() {
                    return Err(OdeError::StepUnderflow { t, h });
                }
                if (t + h - t1) * dir > 0.0 {
                    h = t1 - t;
                }
                let mark = tape.len();
                let mut kx = vec![k1x];
                let mut ka = vec![k1a];
                for s in 1..7 {
                    let terms: Vec<(f64, Var)> = A[s].iter().zip(&kx).map(|(&c, &k)| (c, k)).collect();
                    let y = lincomb(tape, x, h, &terms);
                    let (sx, sa) = f.eval(tape, T::c(t + C[s] * h), y)?;
                    kx.push(sx);
                    ka.push(sa);
                }
                let tx: Vec<(f64, Var)> = A[6].iter().zip(&kx).map(|(&c, &k)| (c, k)).collect();
                let ta: Vec<(f64, Var)> = A[6].iter().zip(&ka).map(|(&c, &k)| (c, k)).collect();
                let x_new = lincomb(tape, x, h, &tx);
                let a_new = lincomb(tape, a, h, &ta);
                // batch-wide scaled RMS error
                let mut errx = Array2::<f64>::zeros((n, 3));
                let mut erra = Array2::<f64>::zeros((n, 1));
                for j in 0..7 {
                    if E[j] != 0.0 {
                        Zip::from(&mut errx).and(tape.value(kx[j])).for_each(|e, &k| *e += h * E[j] * k.f64());
                        Zip::from(&mut erra).and(tape.value(ka[j])).for_each(|e, &k| *e += h * E[j] * k.f64());
                    }
                }
                let (xo, xn, ao, an) = (tape.value(x), tape.value(x_new), tape.value(a), tape.value(a_new));
                let mut err: f64 = 0.0;
                for i in 0..n {
                    let mut s = 0.0;
                    for c in 0..3 {
                        let sc = atol + rtol * xo[[i, c]].f64().abs().max(xn[[i, c]].f64().abs());
                        s += (errx[[i, c]] / sc).powi(2);
                    }
                    let sc = atol + rtol * ao[[i, 0]].f64().abs().max(an[[i, 0]].f64().abs());
                    s += (erra[[i, 0]] / sc).powi(2);
                    err = err.max((s / 4.0).sqrt());
                }
                if !err.is_finite() {
                    return Err(OdeError::NonFinite { t });
                }
                if err <= 1.0 {
                    t += h;
                    x = x_new;
                    a = a_new;
                    k1x = kx[6];
                    k1a = ka[6];
                    check(tape, x, t, &mut stats)?;
                    stats.accepted += 1;
                    reset(tape, &mut [&mut x, &mut a, &mut k1x, &mut k1a]);
                    let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    h *= fac;
                } else {
                    tape.truncate(mark);
                    stats.rejected += 1;
                    h *= (0.9 * err.powf(-0.2)).max(0.2);
                }
            }
        }
    }
    let x = renormalize(tape, x);
    Ok((x, a, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Rotation about z at unit rate; `a` integrates `x_z`.
    fn spin(tape: &mut Tape<f64>, _t: f64, x: Var) -> Result<(Var, Var), OdeError> {
        let xv = tape.value(x).clone();
        let w = tape.constant(array![[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let v = tape.matmul(x, w);
        let z = tape.constant(Array2::from_shape_fn((xv.nrows(), 1), |(i, _)| xv[[i, 2]]));
        Ok((v, z))
    }

    #[test]
    fn solvers_follow_a_rotation() {
        for solver in [Solver::Adaptive { rtol: 1e-9, atol: 1e-9 }, Solver::Rk4 { steps: 200 }] {
            let mut tape = Tape::new();
            let s = 0.6f64;
            let x0 = tape.constant(array![[0.8, 0.0, s]]);
            let opts = IntegrateOptions { solver, ..Default::default() };
            let (x, a, stats) = integrate(&mut tape, &mut spin, x0, 0.0, 1.5, &opts).unwrap();
            let x = tape.value(x);
            assert!((x[[0, 0]] - 0.8 * 1.5f64.cos()).abs() < 1e-7);
            assert!((x[[0, 1]] - 0.8 * 1.5f64.sin()).abs() < 1e-7);
            assert!((tape.value(a)[[0, 0]] - 1.5 * s).abs() < 1e-9);
            assert!(stats.max_drift < 1e-7);
        }
    }

    #[test]
    fn backward_in_time_inverts() {
        let mut tape = Tape::new();
        let x0 = tape.constant(array![[0.0, 0.6, 0.8]]);
        let opts = IntegrateOptions::default();
        let (x1, _, _) = integrate(&mut tape, &mut spin, x0, 0.0, 1.0, &opts).unwrap();
        let (x2, _, _) = integrate(&mut tape, &mut spin, x1, 1.0, 0.0, &opts).unwrap();
        let d = tape.value(x2) - &array![[0.0, 0.6, 0.8]];
        assert!(d.iter().all(|v| v.abs() < 1e-5));
    }
}
