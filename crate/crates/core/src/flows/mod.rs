//! Generative flows on the unit sphere: a continuous normalizing flow and a
//! Moser flow, both built on a tanh network with exact divergences.

pub mod checkpoint;
pub mod cnf;
pub mod field;
pub mod mlp;
pub mod moser;
pub mod ode;
pub mod tape;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use cnf::{cnf_backward, cnf_forward, cnf_log_density, cnf_sample, CnfSolution};
pub use field::{evaluate_field, extend_field, tangent_project, FieldError};
pub use mlp::{Architecture, MlpField};
pub use moser::{moser_density, moser_sample};
pub use ode::{OdeError, Solver};
pub use train::{
    corrected_log_likelihood, evaluate, per_sample_log_likelihood, train, ConstraintSampling, Evaluation, TrainConfig,
    TrainError, TrainingLog,
};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::vec3::{self, Vec3};
use crate::scalar::Real;

/// Points per batch in evaluation-only passes.
pub const EVAL_CHUNK: usize = 1024;

/// Uniform noise density `1/(4π)`.
pub fn noise_density() -> f64 {
    1.0 / (4.0 * std::f64::consts::PI)
}

pub fn noise_log_density() -> f64 {
    -(4.0 * std::f64::consts::PI).ln()
}

/// Normalized standard normal triples.
pub fn uniform_sphere_points(rng: &mut impl Rng, n: usize) -> Vec<Vec3<f64>> {
    (0..n)
        .map(|_| loop {
            let p: Vec3<f64> = std::array::from_fn(|_| StandardNormal.sample(rng));
            if vec3::norm(p) > 1e-12 {
                break vec3::normalize(p);
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Cnf,
    Moser,
}

impl std::str::FromStr for FlowKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cnf" => Ok(FlowKind::Cnf),
            "moser" => Ok(FlowKind::Moser),
            other => Err(format!("unknown model kind '{other}' (expected cnf or moser)")),
        }
    }
}

impl std::fmt::Display for FlowKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FlowKind::Cnf => "cnf",
            FlowKind::Moser => "moser",
        })
    }
}

/// A network plus how to read a density from it. CNF networks take
/// `(x, y, z, t)`, Moser networks `(x, y, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowModel<T> {
    pub kind: FlowKind,
    pub field: MlpField<T>,
    /// Integrator used for CNF densities and samples.
    pub solver: Solver,
    /// Floor inside `log max(μ, ε)` for Moser likelihoods.
    pub moser_eps: f64,
}

impl<T: Real> FlowModel<T> {
    pub fn architecture(kind: FlowKind, hidden: Vec<usize>) -> Architecture {
        let input = match kind {
            FlowKind::Cnf => 4,
            FlowKind::Moser => 3,
        };
        Architecture::new(input, hidden, 3)
    }

    /// A model whose field is identically zero (uniform density).
    pub fn zero(kind: FlowKind, hidden: Vec<usize>) -> Self {
        FlowModel { kind, field: MlpField::zeros(Self::architecture(kind, hidden)), solver: Solver::default(), moser_eps: 1e-5 }
    }

    /// Spherical log densities at `points`.
    pub fn log_density(&self, points: &[Vec3<T>]) -> Result<Vec<T>, OdeError> {
        match self.kind {
            FlowKind::Cnf => cnf_log_density(self, points, self.solver),
            FlowKind::Moser => {
                let eps = T::c(self.moser_eps);
                Ok(moser_density(self, points).into_iter().map(|m| m.max(eps).ln()).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::field::evaluate_field;
    use rand::SeedableRng;

    /// Single linear layer computing `ω × x̂` (time input ignored).
    pub(crate) fn rotation_model(kind: FlowKind, omega: Vec3<f64>) -> FlowModel<f64> {
        let mut m = FlowModel::<f64>::zero(kind, vec![]);
        let w = &mut m.field.params[0];
        // row vector x · W with W_ij such that (x W)_j = (ω × x)_j
        let [a, b, c] = omega;
        let skew = [[0.0, c, -b], [-c, 0.0, a], [b, -a, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                w[[i, j]] = skew[i][j];
            }
        }
        m
    }

    #[test]
    fn special_fields_have_zero_divergence() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pts = uniform_sphere_points(&mut rng, 20);
        let rot = rotation_model(FlowKind::Moser, [0.3, -1.1, 0.7]);
        let (v, div) = evaluate_field(&rot.field, &pts, None);
        for (i, p) in pts.iter().enumerate() {
            assert!(vec3::dist(v[i], vec3::cross([0.3, -1.1, 0.7], *p)) < 1e-14);
            assert!(div[i].abs() < 1e-12);
        }
        let mut radial = FlowModel::<f64>::zero(FlowKind::Moser, vec![]);
        for i in 0..3 {
            radial.field.params[0][[i, i]] = 1.0;
        }
        let (v, div) = evaluate_field(&radial.field, &pts, None);
        assert!(v.iter().all(|v| vec3::norm(*v) < 1e-15));
        assert!(div.iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn zero_models_are_uniform() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let pts = uniform_sphere_points(&mut rng, 10);
        for kind in [FlowKind::Cnf, FlowKind::Moser] {
            let m = FlowModel::<f64>::zero(kind, vec![4]);
            for l in m.log_density(&pts).unwrap() {
                assert_eq!(l, noise_log_density());
            }
        }
        let s = moser_sample(&FlowModel::<f64>::zero(FlowKind::Moser, vec![4]), 5, 3, 10, 1e-5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noise = uniform_sphere_points(&mut rng, 5);
        for (a, b) in s.iter().zip(&noise) {
            assert!(vec3::dist(*a, *b) < 1e-15);
        }
    }

    #[test]
    fn rotation_flow_is_exact_and_volume_preserving() {
        let axis = vec3::normalize([1.0, 2.0, -0.5]);
        let omega = vec3::scale(axis, std::f64::consts::FRAC_PI_2);
        let m = rotation_model(FlowKind::Cnf, omega);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let pts = uniform_sphere_points(&mut rng, 50);
        let sol = cnf_forward(&m, &pts, Solver::Adaptive { rtol: 1e-7, atol: 1e-7 }).unwrap();
        let r = crate::registration::Rotation::from_axis_angle(axis, std::f64::consts::FRAC_PI_2);
        for (p, q) in pts.iter().zip(&sol.terminal) {
            assert!(vec3::dist(r.apply(*p), *q) < 1e-6, "{}", vec3::dist(r.apply(*p), *q));
        }
        assert!(sol.delta_log_density.iter().all(|d| d.abs() < 1e-12));
        assert!(m.log_density(&pts).unwrap().iter().all(|l| (l - noise_log_density()).abs() < 1e-12));
        let mu = moser_density(&rotation_model(FlowKind::Moser, omega), &pts);
        assert!(mu.iter().all(|m| (m - noise_density()).abs() < 1e-15));
    }
}
