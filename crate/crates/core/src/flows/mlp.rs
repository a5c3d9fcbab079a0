//! Tanh multilayer perceptron with a linear output layer.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: String,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Self {
        Architecture { input_dim, hidden, output_dim, activation: "tanh".into() }
    }

    /// `(fan_in, fan_out)` of every affine layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn n_parameters(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// Parameters in declared order: `W₀ (in×out), b₀ (1×out), W₁, b₁, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpField<T> {
    pub arch: Architecture,
    pub params: Vec<Array2<T>>,
}

impl<T: Real> MlpField<T> {
    /// Weights `N(0, 1/fan_in)` (the last layer scaled by `output_gain`),
    /// biases zero.
    pub fn init(arch: Architecture, seed: u64, output_gain: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = arch.layer_shapes();
        let last = shapes.len() - 1;
        let mut params = Vec::with_capacity(2 * shapes.len());
        for (l, &(i, o)) in shapes.iter().enumerate() {
            let gain = if l == last { output_gain } else { 1.0 };
            let normal = Normal::new(0.0, gain / (i as f64).sqrt()).expect("finite std");
            params.push(Array2::from_shape_fn((i, o), |_| T::c(normal.sample(&mut rng))));
            params.push(Array2::zeros((1, o)));
        }
        MlpField { arch, params }
    }

    pub fn zeros(arch: Architecture) -> Self {
        let params = arch
            .layer_shapes()
            .iter()
            .flat_map(|&(i, o)| [Array2::zeros((i, o)), Array2::zeros((1, o))])
            .collect();
        MlpField { arch, params }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Registers the parameters as differentiable leaves.
    pub fn on_tape(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.params.iter().map(|p| tape.param(p.clone())).collect()
    }

    /// Registers the parameters as constants (evaluation only).
    pub fn on_tape_const(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.params.iter().map(|p| tape.constant(p.clone())).collect()
    }

    pub fn flatten(&self) -> Vec<T> {
        self.params.iter().flat_map(|p| p.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[T]) {
        let mut k = 0;
        for p in &mut self.params {
            for v in p.iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }
        assert_eq!(k, flat.len(), "parameter count mismatch");
    }
}

/// Network output for `input` (`n × in`) and, when given, its directional
/// derivatives along `tangents` (`kn × in`, `k` stacked blocks of `n` rows).
pub fn forward<T: Real>(
    tape: &mut Tape<T>,
    params: &[Var],
    input: Var,
    tangents: Option<(Var, usize)>,
) -> (Var, Option<Var>) {
    let n_layers = params.len() / 2;
    let mut h = input;
    let mut dh = tangents.map(|t| t.0);
    for l in 0..n_layers {
        let (w, b) = (params[2 * l], params[2 * l + 1]);
        let z = tape.matmul(h, w);
        let z = tape.add_row(z, b);
        let dz = dh.map(|d| tape.matmul(d, w));
        if l + 1 == n_layers {
            return (z, dz);
        }
        h = tape.tanh(z);
        dh = match (dz, tangents) {
            (Some(dz), Some((_, k))) => {
                let deriv = tape.one_minus_square(h);
                let tiled = if k == 1 { deriv } else { tape.vstack(&vec![deriv; k]) };
                Some(tape.mul(dz, tiled))
            }
            _ => None,
        };
    }
    unreachable!("network has at least one layer")
}
