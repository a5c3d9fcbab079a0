//! JSON model checkpoints.

use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::mlp::{Architecture, MlpField};
use super::ode::Solver;
use super::train::TrainConfig;
use super::{FlowKind, FlowModel};
use crate::scalar::Real;

pub const CHECKPOINT_FORMAT: &str = "cgm-flow-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterArray {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub kind: FlowKind,
    pub architecture: Architecture,
    /// Noise distribution; always the uniform sphere density.
    pub noise: String,
    pub solver: Solver,
    pub moser_eps: f64,
    /// `W0, b0, W1, b1, …` with `W` stored `fan_in × fan_out`, row-major.
    pub parameters: Vec<ParameterArray>,
    pub config: Option<TrainConfig>,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid checkpoint: {0}")]
    Invalid(String),
}

impl Checkpoint {
    pub fn from_model<T: Real>(model: &FlowModel<T>, config: Option<&TrainConfig>) -> Self {
        let parameters = model
            .field
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| ParameterArray {
                name: format!("{}{}", if i % 2 == 0 { "W" } else { "b" }, i / 2),
                shape: [p.nrows(), p.ncols()],
                values: p.iter().map(|v| v.f64()).collect(),
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            kind: model.kind,
            architecture: model.field.arch.clone(),
            noise: "uniform_sphere".into(),
            solver: model.solver,
            moser_eps: model.moser_eps,
            parameters,
            config: config.cloned(),
        }
    }

    pub fn to_model<T: Real>(&self) -> Result<FlowModel<T>, CheckpointError> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(CheckpointError::Invalid(format!("unknown format '{}'", self.format)));
        }
        let shapes = self.architecture.layer_shapes();
        if self.parameters.len() != 2 * shapes.len() {
            return Err(CheckpointError::Invalid("parameter count does not match architecture".into()));
        }
        let mut params = Vec::with_capacity(self.parameters.len());
        for (i, p) in self.parameters.iter().enumerate() {
            let (fi, fo) = shapes[i / 2];
            let expect = if i % 2 == 0 { [fi, fo] } else { [1, fo] };
            if p.shape != expect || p.values.len() != expect[0] * expect[1] {
                return Err(CheckpointError::Invalid(format!("parameter {} has shape {:?}, expected {:?}", p.name, p.shape, expect)));
            }
            if p.values.iter().any(|v| !v.is_finite()) {
                return Err(CheckpointError::Invalid(format!("parameter {} is not finite", p.name)));
            }
            params.push(Array2::from_shape_vec((expect[0], expect[1]), p.values.iter().map(|&v| T::c(v)).collect()).expect("shape checked"));
        }
        Ok(FlowModel { kind: self.kind, field: MlpField { arch: self.architecture.clone(), params }, solver: self.solver, moser_eps: self.moser_eps })
    }
}

pub fn save_checkpoint<T: Real, W: Write>(w: W, model: &FlowModel<T>, config: Option<&TrainConfig>) -> Result<(), CheckpointError> {
    serde_json::to_writer_pretty(w, &Checkpoint::from_model(model, config))?;
    Ok(())
}

pub fn load_checkpoint<T: Real, R: Read>(r: R) -> Result<(FlowModel<T>, Option<TrainConfig>), CheckpointError> {
    let c: Checkpoint = serde_json::from_reader(r)?;
    Ok((c.to_model()?, c.config))
}
