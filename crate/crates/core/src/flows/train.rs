//! Likelihood training with Adam, and evaluation of corrected likelihoods.

use std::io::Write;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::field::rows;
use super::mlp::MlpField;
use super::ode::{OdeError, Solver};
use super::tape::{Tape, Var};
use super::{cnf, moser, uniform_sphere_points, FlowKind, FlowModel, EVAL_CHUNK};
use crate::linalg::vec3::Vec3;
use crate::scalar::Real;
use crate::transport::SphereSample;

/// Where the Moser positivity constraint draws its points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintSampling {
    /// Fresh uniform points on the sphere.
    Sphere,
    /// Points drawn from a supplied pool (mesh samples mapped to the sphere).
    Mesh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    /// Scale of the last layer's initial weights.
    pub output_gain: f64,
    pub solver: Solver,
    pub moser_lambda: f64,
    pub moser_eps: f64,
    pub moser_k: usize,
    pub constraint_sampling: ConstraintSampling,
    /// Validation every this many epochs (and always after the last); 0
    /// means only after the last.
    pub validate_every: usize,
}

impl TrainConfig {
    pub fn cnf() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 256,
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            hidden: vec![32, 32, 32],
            output_gain: 0.1,
            solver: Solver::default(),
            moser_lambda: 100.0,
            moser_eps: 1e-5,
            moser_k: 1024,
            constraint_sampling: ConstraintSampling::Sphere,
            validate_every: 1,
        }
    }

    pub fn moser() -> Self {
        TrainConfig { epochs: 4000, learning_rate: 1e-4, ..Self::cnf() }
    }

    pub fn for_kind(kind: FlowKind) -> Self {
        match kind {
            FlowKind::Cnf => Self::cnf(),
            FlowKind::Moser => Self::moser(),
        }
    }

    fn check(&self) -> Result<(), TrainError> {
        let ok = self.epochs > 0
            && self.batch_size > 0
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.adam_eps > 0.0
            && self.moser_eps > 0.0
            && self.moser_lambda >= 0.0
            && self.output_gain >= 0.0
            && match self.solver {
                Solver::Adaptive { rtol, atol } => rtol > 0.0 && atol > 0.0,
                Solver::Rk4 { steps } => steps > 0,
            };
        if ok {
            Ok(())
        } else {
            Err(TrainError::Config(format!("{self:?}")))
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("mesh constraint sampling needs a non-empty constraint pool")]
    MissingConstraintPool,
    #[error("non-finite loss at epoch {epoch}, batch {batch} (loss {loss})")]
    NonFinite { epoch: usize, batch: usize, loss: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean corrected log likelihood over the epoch's minibatches.
    pub train_ll: f64,
    pub validation_ll: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Seconds since the start of training at the end of each epoch.
    pub wall_seconds: Vec<f64>,
}

impl TrainingLog {
    /// `epoch,train_ll,validation_ll` (empty field when not validated).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,train_ll,validation_ll")?;
        for e in &self.epochs {
            let v = e.validation_ll.map(|v| format!("{v:?}")).unwrap_or_default();
            writeln!(w, "{},{:?},{}", e.epoch, e.train_ll, v)?;
        }
        Ok(())
    }

    pub fn write_wall_time_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,wall_seconds")?;
        for (e, s) in self.epochs.iter().zip(&self.wall_seconds) {
            writeln!(w, "{},{:.3}", e.epoch, s)?;
        }
        Ok(())
    }
}

struct Adam<T> {
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
    t: i32,
}

impl<T: Real> Adam<T> {
    fn new(params: &[Array2<T>]) -> Self {
        let z: Vec<Array2<T>> = params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        Adam { m: z.clone(), v: z, t: 0 }
    }

    fn step(&mut self, params: &mut [Array2<T>], grads: &[Array2<T>], cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (T::c(cfg.beta1), T::c(cfg.beta2));
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let (lr, eps) = (T::c(cfg.learning_rate), T::c(cfg.adam_eps));
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}

/// Per-sample corrected log likelihoods `log ρ(x) − log Δ` as a node.
fn corrected_ll_on_tape<T: Real>(
    tape: &mut Tape<T>,
    params: &[Var],
    kind: FlowKind,
    x: Var,
    log_delta: Var,
    solver: Solver,
    moser_eps: f64,
    keep_graph: bool,
) -> Result<Var, OdeError> {
    let log_rho = match kind {
        FlowKind::Cnf => cnf::log_density_on_tape(tape, params, x, solver, keep_graph)?.0,
        FlowKind::Moser => {
            let mu = moser::density_on_tape(tape, params, x);
            let mu = tape.clamp_min(mu, T::c(moser_eps));
            tape.ln(mu)
        }
    };
    Ok(tape.sub(log_rho, log_delta))
}

fn column<T: Real>(values: impl Iterator<Item = f64>) -> Array2<T> {
    let v: Vec<T> = values.map(T::c).collect();
    let n = v.len();
    Array2::from_shape_vec((n, 1), v).expect("column")
}

fn directions<T: Real>(data: &[SphereSample]) -> Vec<Vec3<T>> {
    data.iter().map(|s| s.direction.map(T::c)).collect()
}

/// Minibatch loss: negative mean corrected log likelihood, plus for Moser
/// `λ · mean_k max(0, ε − μ(z_k))`. Returns the loss node and the batch's
/// mean corrected log likelihood.
pub fn batch_loss<T: Real>(
    tape: &mut Tape<T>,
    params: &[Var],
    kind: FlowKind,
    batch: &[SphereSample],
    constraint: Option<&[Vec3<f64>]>,
    cfg: &TrainConfig,
) -> Result<(Var, f64), OdeError> {
    let x = tape.constant(rows(&directions::<T>(batch)));
    let ld = tape.constant(column(batch.iter().map(|s| s.log_area_correction)));
    let ll = corrected_ll_on_tape(tape, params, kind, x, ld, cfg.solver, cfg.moser_eps, true)?;
    let mean = tape.mean_all(ll);
    let mean_value = tape.value(mean)[[0, 0]].f64();
    let mut loss = tape.scale(mean, -T::one());
    if let (FlowKind::Moser, Some(z)) = (kind, constraint) {
        let zv: Vec<Vec3<T>> = z.iter().map(|p| p.map(T::c)).collect();
        let zx = tape.constant(rows(&zv));
        let mu = moser::density_on_tape(tape, params, zx);
        let gap = tape.scale(mu, -T::one());
        let gap = tape.add_scalar(gap, T::c(cfg.moser_eps));
        let hinge = tape.relu(gap);
        let pen = tape.mean_all(hinge);
        let pen = tape.scale(pen, T::c(cfg.moser_lambda));
        loss = tape.add(loss, pen);
    }
    Ok((loss, mean_value))
}

/// Fits a flow to `train_set` by minimizing the negative corrected log
/// likelihood. Parameters are initialized from `seed` (stream 0),
/// minibatches are shuffled from stream 1 and constraint points drawn from
/// stream 2.
pub fn train<T: Real>(
    kind: FlowKind,
    train_set: &[SphereSample],
    validation: &[SphereSample],
    cfg: &TrainConfig,
    constraint_pool: Option<&[Vec3<f64>]>,
) -> Result<(FlowModel<T>, TrainingLog), TrainError> {
    cfg.check()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if kind == FlowKind::Moser && cfg.constraint_sampling == ConstraintSampling::Mesh && constraint_pool.is_none_or(|p| p.is_empty()) {
        return Err(TrainError::MissingConstraintPool);
    }
    let arch = FlowModel::<T>::architecture(kind, cfg.hidden.clone());
    let mut model: FlowModel<T> = FlowModel { kind, field: MlpField::init(arch, cfg.seed, cfg.output_gain), solver: cfg.solver, moser_eps: cfg.moser_eps };
    let mut adam = Adam::new(&model.field.params);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut constraint_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    constraint_rng.set_stream(2);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = TrainingLog::default();
    let start = Instant::now();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut ll_sum, mut count) = (0.0, 0usize);
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<SphereSample> = idx.iter().map(|&i| train_set[i]).collect();
            let constraint = match (kind, cfg.constraint_sampling) {
                (FlowKind::Cnf, _) => None,
                (FlowKind::Moser, ConstraintSampling::Sphere) => Some(uniform_sphere_points(&mut constraint_rng, cfg.moser_k)),
                (FlowKind::Moser, ConstraintSampling::Mesh) => {
                    let pool = constraint_pool.expect("checked above");
                    Some((0..cfg.moser_k).map(|_| pool[constraint_rng.random_range(0..pool.len())]).collect())
                }
            };
            let mut tape = Tape::new();
            let params = model.field.on_tape(&mut tape);
            let (loss, ll) = batch_loss(&mut tape, &params, kind, &batch, constraint.as_deref(), cfg)?;
            let loss_value = tape.value(loss)[[0, 0]].f64();
            if !loss_value.is_finite() {
                return Err(TrainError::NonFinite { epoch, batch: bi, loss: loss_value });
            }
            let grads = tape.backward(loss);
            let g: Vec<Array2<T>> = params
                .iter()
                .zip(&model.field.params)
                .map(|(v, p)| grads.get(*v).cloned().unwrap_or_else(|| Array2::zeros(p.raw_dim())))
                .collect();
            if g.iter().any(|a| a.iter().any(|v| !v.is_finite())) {
                return Err(TrainError::NonFinite { epoch, batch: bi, loss: loss_value });
            }
            adam.step(&mut model.field.params, &g, cfg);
            ll_sum += ll * batch.len() as f64;
            count += batch.len();
        }
        let last = epoch + 1 == cfg.epochs;
        let due = last || (cfg.validate_every > 0 && (epoch + 1) % cfg.validate_every == 0);
        let validation_ll = if due && !validation.is_empty() { Some(corrected_log_likelihood(&model, validation)?) } else { None };
        log.epochs.push(EpochRecord { epoch, train_ll: ll_sum / count as f64, validation_ll });
        log.wall_seconds.push(start.elapsed().as_secs_f64());
    }
    Ok((model, log))
}

/// `log ρ(x) − log Δ` for every sample; Moser densities are floored at
/// the model's `ε`.
pub fn per_sample_log_likelihood<T: Real>(model: &FlowModel<T>, data: &[SphereSample]) -> Result<Vec<f64>, OdeError> {
    let mut out = Vec::with_capacity(data.len());
    for chunk in data.chunks(EVAL_CHUNK) {
        let mut tape = Tape::new();
        let params = model.field.on_tape_const(&mut tape);
        let x = tape.constant(rows(&directions::<T>(chunk)));
        let ld = tape.constant(column(chunk.iter().map(|s| s.log_area_correction)));
        let ll = corrected_ll_on_tape(&mut tape, &params, model.kind, x, ld, model.solver, model.moser_eps, false)?;
        out.extend(tape.value(ll).iter().map(|v| v.f64()));
    }
    Ok(out)
}

/// Mean corrected log likelihood per sample.
pub fn corrected_log_likelihood<T: Real>(model: &FlowModel<T>, data: &[SphereSample]) -> Result<f64, OdeError> {
    Ok(evaluate(model, data)?.mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mean: f64,
    /// Population standard deviation over `√n`.
    pub stderr: f64,
    pub n: usize,
}

impl Evaluation {
    /// Mean and standard error of per-sample values; NaN for an empty slice.
    pub fn from_values(ll: &[f64]) -> Self {
        let n = ll.len();
        if n == 0 {
            return Evaluation { mean: f64::NAN, stderr: f64::NAN, n };
        }
        // shifted by the first value so a constant sample has exactly zero spread
        let shift = ll[0];
        let mean = shift + ll.iter().map(|v| v - shift).sum::<f64>() / n as f64;
        let var = ll.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        Evaluation { mean, stderr: (var / n as f64).sqrt(), n }
    }
}

pub fn evaluate<T: Real>(model: &FlowModel<T>, data: &[SphereSample]) -> Result<Evaluation, OdeError> {
    Ok(Evaluation::from_values(&per_sample_log_likelihood(model, data)?))
}
