//! Declarative pipeline configuration (TOML).
//!
//! Relative paths are resolved against the directory holding the config
//! file. Every field except `meshes` has a default.
//!
//! ```toml
//! meshes = ["a.obj", "b.ply"]
//! intensities = ["a.txt", "b.txt"]   # optional; omit for uniform-by-area data
//! reference = 1                      # 1-based mesh id aligned to
//! bandwidth = 32
//! train_samples = 5000               # per mesh
//! validation_samples = 5000          # per mesh
//! output_dir = "out"
//! seed = 0
//!
//! [train]                            # overrides on the per-kind defaults
//! epochs = 10
//! solver = { method = "rk4", steps = 20 }
//!
//! [sample]
//! n = 10000
//! moser_steps = 40
//!
//! [harness]
//! seeds = [0, 1, 2, 3, 4]
//! heldout_k = [1, 2, 3, 4]
//! ```

use std::path::{Path, PathBuf};

use cgm_core::flows::{ConstraintSampling, FlowKind, Solver, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{io, user, Result};

/// Environment variable overriding the output root.
pub const OUTPUT_ROOT_ENV: &str = "CGM_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub meshes: Vec<PathBuf>,
    #[serde(default)]
    pub intensities: Vec<PathBuf>,
    #[serde(default = "default_reference")]
    pub reference: usize,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: usize,
    /// Local refinement of the correlation maximum.
    #[serde(default)]
    pub refine: bool,
    #[serde(default = "default_samples")]
    pub train_samples: usize,
    #[serde(default = "default_samples")]
    pub validation_samples: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub train: TrainOverrides,
    #[serde(default)]
    pub sample: SampleSettings,
    #[serde(default)]
    pub harness: HarnessSettings,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_reference() -> usize {
    1
}
fn default_bandwidth() -> usize {
    32
}
fn default_samples() -> usize {
    5000
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Optional replacements for fields of [`TrainConfig::for_kind`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub adam_eps: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub output_gain: Option<f64>,
    pub solver: Option<Solver>,
    pub moser_lambda: Option<f64>,
    pub moser_eps: Option<f64>,
    pub moser_k: Option<usize>,
    pub constraint_sampling: Option<ConstraintSampling>,
    pub validate_every: Option<usize>,
    /// Per-kind overrides applied after the shared ones.
    pub cnf: Option<Box<TrainOverrides>>,
    pub moser: Option<Box<TrainOverrides>>,
}

impl TrainOverrides {
    fn apply(&self, c: &mut TrainConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { c.$f = v.clone(); } )* };
        }
        set!(epochs, batch_size, learning_rate, beta1, beta2, adam_eps, hidden, output_gain, solver, moser_lambda, moser_eps, moser_k, constraint_sampling, validate_every);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSettings {
    pub n: usize,
    /// RK4 steps of the Moser sampling ODE.
    pub moser_steps: usize,
}

impl Default for SampleSettings {
    fn default() -> Self {
        SampleSettings { n: 10_000, moser_steps: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessSettings {
    /// Root seeds of the repeated runs.
    pub seeds: Vec<u64>,
    /// Training-mesh counts of the held-out harness.
    pub heldout_k: Vec<usize>,
}

impl Default for HarnessSettings {
    fn default() -> Self {
        HarnessSettings { seeds: vec![0, 1, 2, 3, 4], heldout_k: vec![1, 2, 3, 4] }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| user(format!("config: {e}")))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base).map_err(|e| user(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.meshes.len();
        if n == 0 {
            return Err(user("config lists no meshes"));
        }
        if !self.intensities.is_empty() && self.intensities.len() != n {
            return Err(user(format!("{} intensity files for {n} meshes", self.intensities.len())));
        }
        if !(1..=n).contains(&self.reference) {
            return Err(user(format!("reference mesh {} is not in 1..={n}", self.reference)));
        }
        if self.bandwidth == 0 {
            return Err(user("bandwidth must be positive"));
        }
        if self.train_samples == 0 || self.validation_samples == 0 || self.sample.n == 0 || self.sample.moser_steps == 0 {
            return Err(user("sample counts must be positive"));
        }
        if self.harness.seeds.is_empty() {
            return Err(user("harness.seeds is empty"));
        }
        Ok(())
    }

    pub fn n_meshes(&self) -> usize {
        self.meshes.len()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Path of mesh `id` (1-based).
    pub fn mesh_path(&self, id: usize) -> PathBuf {
        self.resolve(&self.meshes[id - 1])
    }

    pub fn intensity_path(&self, id: usize) -> Option<PathBuf> {
        self.intensities.get(id - 1).map(|p| self.resolve(p))
    }

    /// `--out`, then the environment override, then `output_dir`.
    pub fn output_root(&self, out: Option<&Path>) -> PathBuf {
        if let Some(o) = out {
            return o.to_path_buf();
        }
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.resolve(&self.output_dir),
        }
    }

    /// Per-kind defaults with the config overrides applied; `seed` is the
    /// stage seed for this training run.
    pub fn train_config(&self, kind: FlowKind, seed: u64) -> TrainConfig {
        let mut c = TrainConfig::for_kind(kind);
        self.train.apply(&mut c);
        let specific = match kind {
            FlowKind::Cnf => &self.train.cnf,
            FlowKind::Moser => &self.train.moser,
        };
        if let Some(o) = specific {
            o.apply(&mut c);
        }
        c.seed = seed;
        c
    }

    pub fn check_mesh_id(&self, id: usize) -> Result<()> {
        if (1..=self.n_meshes()).contains(&id) {
            Ok(())
        } else {
            Err(user(format!("mesh id {id} is not in 1..={}", self.n_meshes())))
        }
    }
}
