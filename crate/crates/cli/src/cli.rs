use std::path::PathBuf;

use clap::{Parser, Subcommand};

use cgm_core::flows::FlowKind;

use crate::config::PipelineConfig;
use crate::error::{user, Result};
use crate::pipeline::{self, Context};
use crate::harness;

#[derive(Debug, Parser)]
#[command(name = "cgm", version, about = "Conformal generative modeling on triangle meshes")]
pub struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, default_value = "cgm.toml")]
    pub config: PathBuf,
    /// Root seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root; overrides CGM_OUTPUT_ROOT and the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Conformally map each mesh to the unit sphere.
    Parameterize {
        #[arg(long)]
        mesh_id: Option<usize>,
    },
    /// Rotate every sphere into the reference mesh's frame.
    Align,
    /// Sample train/validation sets on every mesh and pool them.
    MakeDataset,
    /// Train a spherical model on the pooled data (or one mesh's).
    Train {
        #[arg(long, default_value = "cnf")]
        kind: FlowKind,
        #[arg(long)]
        mesh_id: Option<usize>,
    },
    /// Draw samples from a model onto a mesh (CSV + PLY heat map).
    Sample {
        #[arg(long, default_value = "cnf")]
        kind: FlowKind,
        /// Checkpoint to use instead of the trained `<kind>` model.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        mesh_id: usize,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Mean corrected log likelihood ± standard error.
    Eval {
        #[arg(long, default_value = "cnf")]
        kind: FlowKind,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Restrict to one mesh's validation set (or its rows of --dataset).
        #[arg(long)]
        mesh_id: Option<usize>,
        /// Dataset CSV to score instead of the validation sets.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// PLY of a mesh colored by the model's density on it.
    ExportDensity {
        #[arg(long, default_value = "cnf")]
        kind: FlowKind,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        mesh_id: usize,
        /// Segments per original edge.
        #[arg(long, default_value_t = 1)]
        resolution: usize,
    },
    /// Per-mesh log-likelihood table, mean ± std over the harness seeds.
    Table {
        #[arg(long, value_delimiter = ',', default_value = "cnf")]
        kind: Vec<FlowKind>,
    },
    /// Held-out-mesh experiment over k training meshes.
    Heldout {
        #[arg(long, default_value = "cnf")]
        kind: FlowKind,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    if !cli.config.exists() {
        return Err(user(format!("config file {} not found", cli.config.display())));
    }
    let cfg = PipelineConfig::load(&cli.config)?;
    let ctx = Context::new(cfg, cli.out.as_deref(), cli.seed);
    match cli.command {
        Command::Parameterize { mesh_id } => pipeline::parameterize(&ctx, mesh_id).map(drop),
        Command::Align => pipeline::align(&ctx).map(drop),
        Command::MakeDataset => pipeline::make_dataset(&ctx).map(drop),
        Command::Train { kind, mesh_id } => pipeline::train_model(&ctx, kind, mesh_id).map(drop),
        Command::Sample { kind, model, mesh_id, n } => pipeline::sample(&ctx, kind, model.as_deref(), mesh_id, n).map(drop),
        Command::Eval { kind, model, mesh_id, dataset } => pipeline::eval(&ctx, kind, model.as_deref(), mesh_id, dataset.as_deref()).map(drop),
        Command::ExportDensity { kind, model, mesh_id, resolution } => {
            pipeline::export_density(&ctx, kind, model.as_deref(), mesh_id, resolution).map(drop)
        }
        Command::Table { kind } => harness::table(&ctx, &kind).map(drop),
        Command::Heldout { kind } => harness::heldout(&ctx, kind).map(drop),
    }
}
