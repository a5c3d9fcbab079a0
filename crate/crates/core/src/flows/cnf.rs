//! Continuous normalizing flow on the sphere: data at `t = 0`, uniform
//! noise at `t = 1`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::field::{field_and_divergence, rows, to_points};
use super::ode::{integrate, IntegrateOptions, OdeError, OdeStats, Solver};
use super::tape::{Tape, Var};
use super::{noise_log_density, uniform_sphere_points, FlowModel, EVAL_CHUNK};
use crate::linalg::vec3::Vec3;
use crate::scalar::Real;

/// Terminal points and the change of log density along each trajectory.
#[derive(Debug, Clone)]
pub struct CnfSolution<T> {
    pub terminal: Vec<Vec3<T>>,
    /// `log ρ(end) − log ρ(start) = −∫ div f dt`.
    pub delta_log_density: Vec<T>,
    pub stats: OdeStats,
}

/// Flows the batch `x` on the tape from `t0` to `t1`; returns the terminal
/// node and `∫ div f dt` (`n × 1`).
pub fn flow_on_tape<T: Real>(
    tape: &mut Tape<T>,
    params: &[Var],
    x: Var,
    t0: f64,
    t1: f64,
    opts: &IntegrateOptions,
) -> Result<(Var, Var, OdeStats), OdeError> {
    let mut dyn_ = |tape: &mut Tape<T>, t: T, x: Var| Ok(field_and_divergence(tape, params, x, Some(t)));
    integrate(tape, &mut dyn_, x, t0, t1, opts)
}

/// `log ρ(x) = log ν + ∫₀¹ div f dt` for the batch `x`, on the tape.
pub fn log_density_on_tape<T: Real>(
    tape: &mut Tape<T>,
    params: &[Var],
    x: Var,
    solver: Solver,
    keep_graph: bool,
) -> Result<(Var, OdeStats), OdeError> {
    let opts = IntegrateOptions { solver, keep_graph, ..Default::default() };
    let (_, a, stats) = flow_on_tape(tape, params, x, 0.0, 1.0, &opts)?;
    Ok((tape.add_scalar(a, T::c(noise_log_density())), stats))
}

fn solve<T: Real>(model: &FlowModel<T>, points: &[Vec3<T>], t0: f64, t1: f64, solver: Solver) -> Result<CnfSolution<T>, OdeError> {
    let mut out = CnfSolution { terminal: Vec::with_capacity(points.len()), delta_log_density: Vec::new(), stats: OdeStats::default() };
    for chunk in points.chunks(EVAL_CHUNK) {
        let mut tape = Tape::new();
        let p = model.field.on_tape_const(&mut tape);
        let x = tape.constant(rows(chunk));
        let opts = IntegrateOptions { solver, ..Default::default() };
        let (xt, a, stats) = flow_on_tape(&mut tape, &p, x, t0, t1, &opts)?;
        out.terminal.extend(to_points(tape.value(xt)));
        out.delta_log_density.extend(tape.value(a).iter().map(|&v| -v));
        out.stats.accepted += stats.accepted;
        out.stats.rejected += stats.rejected;
        out.stats.max_drift = out.stats.max_drift.max(stats.max_drift);
    }
    Ok(out)
}

/// Data to noise (`t: 0 → 1`).
pub fn cnf_forward<T: Real>(model: &FlowModel<T>, points: &[Vec3<T>], solver: Solver) -> Result<CnfSolution<T>, OdeError> {
    solve(model, points, 0.0, 1.0, solver)
}

/// Noise to data (`t: 1 → 0`).
pub fn cnf_backward<T: Real>(model: &FlowModel<T>, points: &[Vec3<T>], solver: Solver) -> Result<CnfSolution<T>, OdeError> {
    solve(model, points, 1.0, 0.0, solver)
}

pub fn cnf_log_density<T: Real>(model: &FlowModel<T>, points: &[Vec3<T>], solver: Solver) -> Result<Vec<T>, OdeError> {
    let sol = cnf_forward(model, points, solver)?;
    Ok(sol.delta_log_density.iter().map(|&d| T::c(noise_log_density()) - d).collect())
}

/// Uniform noise flowed backward to data space.
pub fn cnf_sample<T: Real>(model: &FlowModel<T>, n: usize, seed: u64, solver: Solver) -> Result<Vec<Vec3<T>>, OdeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<Vec3<T>> = uniform_sphere_points(&mut rng, n).into_iter().map(|p| p.map(T::c)).collect();
    Ok(cnf_backward(model, &noise, solver)?.terminal)
}
