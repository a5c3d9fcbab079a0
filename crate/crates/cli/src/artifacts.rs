//! On-disk artifacts, their provenance hashes, and per-stage seeds.
//!
//! Every artifact records the SHA-256 of each file it was derived from,
//! transitively (`inputs`). Consumers recompute those hashes and refuse to
//! run on a stale chain. Keys name files independently of where they live:
//! `mesh/<id>`, `intensity/<id>` for configured inputs and `out/<relative
//! path>` for files under the output root.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use cgm_core::registration::Rotation;
use cgm_core::SphericalParameterization;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{internal, io, user, Result};

pub const PARAM_FORMAT: &str = "cgm-parameterization/1";
pub const ALIGN_FORMAT: &str = "cgm-alignment/1";
pub const DATASET_FORMAT: &str = "cgm-dataset-manifest/1";
pub const MODEL_FORMAT: &str = "cgm-model-manifest/1";

/// Provenance: key → lowercase hex SHA-256.
pub type Hashes = BTreeMap<String, String>;

pub fn sha256_bytes(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = BufReader::new(fs::File::open(path).map_err(|e| io(path, e))?);
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(format!("{:x}", h.finalize()))
}

/// Seed of one stage/job, derived from the root seed.
pub fn stage_seed(root: u64, stage: &str, index: u64) -> u64 {
    let d = Sha256::digest(format!("{root}/{stage}/{index}").as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// File layout under the output root.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn param(&self, id: usize) -> String {
        format!("param/mesh_{id}.json")
    }
    pub fn align(&self, id: usize) -> String {
        format!("align/mesh_{id}.json")
    }
    pub fn train_csv(&self, id: usize) -> String {
        format!("data/mesh_{id}_train.csv")
    }
    pub fn validation_csv(&self, id: usize) -> String {
        format!("data/mesh_{id}_validation.csv")
    }
    pub fn pooled_train_csv(&self) -> String {
        "data/pooled_train.csv".into()
    }
    pub fn pooled_validation_csv(&self) -> String {
        "data/pooled_validation.csv".into()
    }
    pub fn dataset_manifest(&self) -> String {
        "data/manifest.json".into()
    }
    pub fn model(&self, name: &str) -> String {
        format!("models/{name}.json")
    }
    pub fn model_log(&self, name: &str) -> String {
        format!("models/{name}_log.csv")
    }
    /// Wall-clock seconds per epoch; the one output that is not reproducible.
    pub fn model_wall_time(&self, name: &str) -> String {
        format!("models/{name}_wall_time.csv")
    }
    pub fn model_manifest(&self, name: &str) -> String {
        format!("models/{name}_manifest.json")
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn key(rel: &str) -> String {
        format!("out/{rel}")
    }

    /// Absolute path of a provenance key.
    pub fn resolve_key(&self, cfg: &PipelineConfig, key: &str) -> Result<PathBuf> {
        let bad = || internal(format!("malformed provenance key {key:?}"));
        let (kind, rest) = key.split_once('/').ok_or_else(bad)?;
        let id = || -> Result<usize> {
            let id: usize = rest.parse().map_err(|_| bad())?;
            cfg.check_mesh_id(id)?;
            Ok(id)
        };
        match kind {
            "out" => Ok(self.path(rest)),
            "mesh" => Ok(cfg.mesh_path(id()?)),
            "intensity" => cfg.intensity_path(id()?).ok_or_else(|| user(format!("{key} recorded but no intensities are configured"))),
            _ => Err(bad()),
        }
    }

    /// Hash of an output file, keyed.
    pub fn hash_out(&self, rel: &str) -> Result<(String, String)> {
        Ok((Self::key(rel), sha256_file(&self.path(rel))?))
    }

    /// Refuses when any recorded input changed or disappeared.
    pub fn verify(&self, cfg: &PipelineConfig, what: &str, inputs: &Hashes) -> Result<()> {
        for (key, want) in inputs {
            let path = self.resolve_key(cfg, key)?;
            if !path.exists() {
                return Err(user(format!("{what} was built from {key} ({}), which no longer exists; rerun the upstream stage", path.display())));
            }
            if &sha256_file(&path)? != want {
                return Err(user(format!("{what} is stale: {key} ({}) changed since it was built; rerun the upstream stage", path.display())));
            }
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<String> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| internal(format!("{rel}: {e}")))?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    /// Writes a file under the root, returning its hash.
    pub fn write_bytes(&self, rel: &str, bytes: &[u8]) -> Result<String> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        }
        let mut f = fs::File::create(&path).map_err(|e| io(&path, e))?;
        f.write_all(bytes).map_err(|e| io(&path, e))?;
        Ok(sha256_bytes(bytes))
    }

    pub fn read_json<T: DeserializeOwned>(&self, rel: &str, upstream: &str) -> Result<T> {
        let path = self.path(rel);
        let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => user(format!("missing artifact {} (run `{upstream}` first)", path.display())),
            _ => io(&path, e),
        })?;
        serde_json::from_str(&text).map_err(|e| user(format!("{}: {e}", path.display())))
    }
}

fn check_format(found: &str, want: &str, what: &str) -> Result<()> {
    if found == want {
        Ok(())
    } else {
        Err(user(format!("{what}: format {found:?}, expected {want:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamArtifact {
    pub format: String,
    pub mesh_id: usize,
    /// Mesh path as written in the config.
    pub mesh: String,
    pub inputs: Hashes,
    pub parameterization: SphericalParameterization,
}

impl ParamArtifact {
    pub fn check(&self) -> Result<()> {
        check_format(&self.format, PARAM_FORMAT, "parameterization artifact")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignArtifact {
    pub format: String,
    pub mesh_id: usize,
    pub reference_id: usize,
    pub bandwidth: usize,
    pub refine: bool,
    /// Row-major; maps this mesh's sphere into the reference frame.
    pub rotation: Rotation,
    pub euler_zyz: [f64; 3],
    /// Correlation at the optimum; absent for the reference itself.
    pub correlation: Option<f64>,
    pub flat: bool,
    pub inputs: Hashes,
}

impl AlignArtifact {
    pub fn check(&self) -> Result<()> {
        check_format(&self.format, ALIGN_FORMAT, "alignment artifact")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub mesh_id: usize,
    pub seed: u64,
    /// `"uniform"` (by area) or `"intensity"`.
    pub density: String,
    pub train: String,
    pub validation: String,
    pub train_rows: usize,
    pub validation_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub root_seed: u64,
    pub meshes: Vec<DatasetEntry>,
    pub pooled_train: String,
    pub pooled_validation: String,
    pub inputs: Hashes,
    pub outputs: Hashes,
}

impl DatasetManifest {
    pub fn check(&self) -> Result<()> {
        check_format(&self.format, DATASET_FORMAT, "dataset manifest")
    }

    pub fn entry(&self, id: usize) -> Result<&DatasetEntry> {
        self.meshes.iter().find(|e| e.mesh_id == id).ok_or_else(|| user(format!("dataset has no mesh {id}; rerun make-dataset")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format: String,
    pub name: String,
    pub kind: cgm_core::flows::FlowKind,
    pub train_meshes: Vec<usize>,
    pub seed: u64,
    pub final_train_ll: f64,
    pub final_validation_ll: Option<f64>,
    pub inputs: Hashes,
    pub outputs: Hashes,
}

impl ModelManifest {
    pub fn check(&self) -> Result<()> {
        check_format(&self.format, MODEL_FORMAT, "model manifest")
    }
}
