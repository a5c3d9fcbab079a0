//! Moser flow: density `μ = ν − div F` for a learned tangent flux `F`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::field::{field_and_divergence, rows, to_points};
use super::ode::{integrate, IntegrateOptions, OdeError, Solver};
use super::tape::{Tape, Var};
use super::{noise_density, uniform_sphere_points, FlowModel, EVAL_CHUNK};
use crate::linalg::vec3::Vec3;
use crate::scalar::Real;

/// `μ(x)` for the batch `x` (`n × 1` node).
pub fn density_on_tape<T: Real>(tape: &mut Tape<T>, params: &[Var], x: Var) -> Var {
    let (_, div) = field_and_divergence(tape, params, x, None);
    let neg = tape.scale(div, -T::one());
    tape.add_scalar(neg, T::c(noise_density()))
}

pub fn moser_density<T: Real>(model: &FlowModel<T>, points: &[Vec3<T>]) -> Vec<T> {
    let mut out = Vec::with_capacity(points.len());
    for chunk in points.chunks(EVAL_CHUNK) {
        let mut tape = Tape::new();
        let p = model.field.on_tape_const(&mut tape);
        let x = tape.constant(rows(chunk));
        let mu = density_on_tape(&mut tape, &p, x);
        out.extend(tape.value(mu).iter().copied());
    }
    out
}

/// Samples by integrating `f(x, t) = −F(x) / ρ_t(x)` with
/// `ρ_t = ν − (1 − t) div F` from uniform noise at `t = 1` back to `t = 0`
/// using `steps` RK4 steps, renormalizing after each. Fails when `ρ_t`
/// drops below `eps` anywhere along the way. Steps are projected back onto
/// the sphere, so off-sphere drift is not an error here.
pub fn moser_sample<T: Real>(model: &FlowModel<T>, n: usize, seed: u64, steps: usize, eps: f64) -> Result<Vec<Vec3<T>>, OdeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<Vec3<T>> = uniform_sphere_points(&mut rng, n).into_iter().map(|p| p.map(T::c)).collect();
    let mut out = Vec::with_capacity(n);
    for chunk in noise.chunks(EVAL_CHUNK) {
        let mut tape = Tape::new();
        let p = model.field.on_tape_const(&mut tape);
        let x = tape.constant(rows(chunk));
        let mut dyn_ = |tape: &mut Tape<T>, t: T, x: Var| -> Result<(Var, Var), OdeError> {
            let (v, div) = field_and_divergence(tape, &p, x, None);
            let s = tape.scale(div, t - T::one());
            let rho = tape.add_scalar(s, T::c(noise_density()));
            let lo = tape.value(rho).iter().fold(f64::INFINITY, |m, v| m.min(v.f64()));
            if !(lo >= eps) {
                return Err(OdeError::Denominator { value: lo, eps });
            }
            let inv = tape.recip(rho);
            let f = tape.mul_col(v, inv);
            let f = tape.scale(f, -T::one());
            let zero = tape.scale(rho, T::zero());
            Ok((f, zero))
        };
        let opts = IntegrateOptions {
            solver: Solver::Rk4 { steps },
            renormalize_each_step: true,
            drift_limit: f64::INFINITY,
            ..Default::default()
        };
        let (xt, _, _) = integrate(&mut tape, &mut dyn_, x, 1.0, 0.0, &opts)?;
        out.extend(to_points(tape.value(xt)));
    }
    Ok(out)
}
