//! The pipeline stages. Each reads its upstream artifacts (refusing stale
//! ones), writes its own, and prints a short report on stdout.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cgm_core::conformal::{spherical_parameterize, FlattenError, ParameterizeOptions};
use cgm_core::flows::{
    cnf_sample, load_checkpoint, moser_density, moser_sample, per_sample_log_likelihood, save_checkpoint, train, ConstraintSampling,
    Evaluation, FlowKind, FlowModel, TrainConfig, TrainingLog,
};
use cgm_core::linalg::vec3::Vec3;
use cgm_core::mesh::geometry::barycentric_point;
use cgm_core::mesh::io::{load_mesh, read_intensities, write_ply};
use cgm_core::registration::{align as align_spheres, AlignOptions, Rotation};
use cgm_core::transport::{
    contact_probabilities, face_distribution, from_sphere, pool, read_dataset_csv, sample_surface, to_sphere_dataset, write_dataset_csv,
    FaceDistribution, SphereSample,
};
use cgm_core::{SphericalTriangulation, SurfacePoint, TriangleMesh};
use serde::Serialize;

use crate::artifacts::*;
use crate::colormap;
use crate::config::PipelineConfig;
use crate::error::{internal, io, user, CliError, Result};

/// Configuration, output layout and root seed of one invocation.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: PipelineConfig,
    pub layout: Layout,
    pub seed: u64,
}

/// Everything known about one mesh after parameterization and alignment.
pub struct MeshState {
    pub id: usize,
    pub mesh: TriangleMesh,
    pub tri: SphericalTriangulation,
    pub rotation: Rotation,
    /// Provenance closure of the alignment artifact plus the artifact itself.
    pub inputs: Hashes,
}

fn flatten_error(e: FlattenError) -> CliError {
    match e {
        FlattenError::NotTopologicalSphere { .. } | FlattenError::Degree { .. } | FlattenError::Mesh(_) => user(e.to_string()),
        other => internal(other.to_string()),
    }
}

fn transport_error(e: cgm_core::transport::TransportError) -> CliError {
    use cgm_core::transport::TransportError as T;
    match e {
        T::NoPositiveWeight | T::InvalidWeight { .. } | T::LengthMismatch { .. } | T::NoSamples | T::Csv(_) => user(e.to_string()),
        other => internal(other.to_string()),
    }
}

/// Name of a trained model: the kind, suffixed with the mesh for
/// single-mesh models.
pub fn model_name(kind: FlowKind, mesh_id: Option<usize>) -> String {
    match mesh_id {
        Some(id) => format!("{kind}_mesh_{id}"),
        None => kind.to_string(),
    }
}

impl Context {
    pub fn new(cfg: PipelineConfig, out: Option<&Path>, seed: Option<u64>) -> Self {
        let root = cfg.output_root(out);
        let seed = seed.unwrap_or(cfg.seed);
        Context { cfg, layout: Layout { root }, seed }
    }

    pub fn mesh_ids(&self) -> Vec<usize> {
        (1..=self.cfg.n_meshes()).collect()
    }

    pub fn load_mesh(&self, id: usize) -> Result<TriangleMesh> {
        let path = self.cfg.mesh_path(id);
        load_mesh::<f64>(&path, None).map_err(|e| user(format!("mesh {id} ({}): {e}", path.display())))
    }

    pub fn load_param(&self, id: usize) -> Result<ParamArtifact> {
        let rel = self.layout.param(id);
        let a: ParamArtifact = self.layout.read_json(&rel, "parameterize")?;
        a.check()?;
        self.layout.verify(&self.cfg, &rel, &a.inputs)?;
        Ok(a)
    }

    pub fn load_align(&self, id: usize) -> Result<AlignArtifact> {
        let rel = self.layout.align(id);
        let a: AlignArtifact = self.layout.read_json(&rel, "align")?;
        a.check()?;
        if a.reference_id != self.cfg.reference {
            return Err(user(format!("{rel} was aligned to mesh {}, config says {}; rerun align", a.reference_id, self.cfg.reference)));
        }
        self.layout.verify(&self.cfg, &rel, &a.inputs)?;
        Ok(a)
    }

    pub fn load_state(&self, id: usize) -> Result<MeshState> {
        self.cfg.check_mesh_id(id)?;
        let align = self.load_align(id)?;
        let param = self.load_param(id)?;
        let mesh = self.load_mesh(id)?;
        let p = param.parameterization;
        let tri = SphericalTriangulation::from_parts(&mesh, p.positions, p.u).map_err(|e| user(format!("mesh {id}: {e}")))?;
        let mut inputs = align.inputs.clone();
        let (k, h) = self.layout.hash_out(&self.layout.align(id))?;
        inputs.insert(k, h);
        Ok(MeshState { id, mesh, tri, rotation: align.rotation, inputs })
    }

    pub fn load_dataset_manifest(&self) -> Result<DatasetManifest> {
        let rel = self.layout.dataset_manifest();
        let m: DatasetManifest = self.layout.read_json(&rel, "make-dataset")?;
        m.check()?;
        self.layout.verify(&self.cfg, &rel, &m.inputs)?;
        self.layout.verify(&self.cfg, &rel, &m.outputs)?;
        Ok(m)
    }

    pub fn read_dataset(&self, rel: &str) -> Result<Vec<SphereSample>> {
        read_dataset_file(&self.layout.path(rel))
    }

    /// Checkpoint of a trained model, verified against its manifest.
    pub fn load_model(&self, name: &str) -> Result<(FlowModel<f64>, Hashes)> {
        let rel = self.layout.model_manifest(name);
        let m: ModelManifest = self.layout.read_json(&rel, "train")?;
        m.check()?;
        self.layout.verify(&self.cfg, &rel, &m.inputs)?;
        self.layout.verify(&self.cfg, &rel, &m.outputs)?;
        let (model, _) = load_model_file(&self.layout.path(&self.layout.model(name)))?;
        let mut inputs = m.inputs.clone();
        inputs.extend(m.outputs.clone());
        Ok((model, inputs))
    }

    /// `--model` path if given, else the named model under the root.
    fn resolve_model(&self, explicit: Option<&Path>, name: &str) -> Result<(FlowModel<f64>, String, Hashes)> {
        match explicit {
            Some(p) => {
                let (model, _) = load_model_file(p)?;
                let mut h = Hashes::new();
                h.insert(format!("model/{}", p.display()), sha256_file(p)?);
                let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| name.to_string());
                Ok((model, label, h))
            }
            None => {
                let (model, inputs) = self.load_model(name)?;
                Ok((model, name.to_string(), inputs))
            }
        }
    }
}

pub fn read_dataset_file(path: &Path) -> Result<Vec<SphereSample>> {
    let f = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => user(format!("missing dataset {} (run `make-dataset` first)", path.display())),
        _ => io(path, e),
    })?;
    read_dataset_csv(f).map_err(|e| user(format!("{}: {e}", path.display())))
}

pub fn load_model_file(path: &Path) -> Result<(FlowModel<f64>, Option<TrainConfig>)> {
    let f = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => user(format!("missing model {} (run `train` first)", path.display())),
        _ => io(path, e),
    })?;
    load_checkpoint(std::io::BufReader::new(f)).map_err(|e| user(format!("{}: {e}", path.display())))
}

fn dataset_bytes(samples: &[SphereSample]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_dataset_csv(&mut buf, samples).map_err(|e| internal(e.to_string()))?;
    Ok(buf)
}

// ---------------------------------------------------------------- parameterize

/// Parameterizes every mesh (or just `only`). All meshes are attempted;
/// the error lists every failure.
pub fn parameterize(ctx: &Context, only: Option<usize>) -> Result<Vec<ParamArtifact>> {
    let ids = match only {
        Some(id) => {
            ctx.cfg.check_mesh_id(id)?;
            vec![id]
        }
        None => ctx.mesh_ids(),
    };
    let mut done = Vec::new();
    let mut failures: Vec<CliError> = Vec::new();
    for id in ids {
        let path = ctx.cfg.mesh_path(id);
        let result = (|| -> Result<ParamArtifact> {
            let mesh = ctx.load_mesh(id)?;
            let p = spherical_parameterize(&mesh, &ParameterizeOptions::default()).map_err(flatten_error)?;
            let mut inputs = Hashes::new();
            inputs.insert(format!("mesh/{id}"), sha256_file(&path)?);
            let artifact = ParamArtifact {
                format: PARAM_FORMAT.into(),
                mesh_id: id,
                mesh: ctx.cfg.meshes[id - 1].display().to_string(),
                inputs,
                parameterization: p,
            };
            ctx.layout.write_json(&ctx.layout.param(id), &artifact)?;
            Ok(artifact)
        })();
        match result {
            Ok(a) => {
                let r = &a.parameterization.report;
                println!(
                    "mesh {id} ({}): {} vertices, newton {} its, max angle defect {:.3e}, max conformal residual {:.3e}, center {:.3e}",
                    path.display(),
                    a.parameterization.n_vertices(),
                    r.newton_iterations,
                    r.max_angle_defect,
                    r.max_conformal_residual,
                    r.center_norm
                );
                done.push(a);
            }
            Err(e) => {
                eprintln!("mesh {id} ({}): {e}", path.display());
                failures.push(match e {
                    CliError::User(m) => user(format!("mesh {id} ({}): {m}", path.display())),
                    CliError::Internal(m) => internal(format!("mesh {id} ({}): {m}", path.display())),
                });
            }
        }
    }
    if failures.is_empty() {
        return Ok(done);
    }
    let msg = failures.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ");
    Err(if failures.iter().any(CliError::is_user) { user(msg) } else { internal(msg) })
}

// ---------------------------------------------------------------------- align

/// Aligns every mesh to the reference; the reference gets an explicit
/// identity.
pub fn align(ctx: &Context) -> Result<Vec<AlignArtifact>> {
    let r = ctx.cfg.reference;
    let opts = AlignOptions { bandwidth: ctx.cfg.bandwidth, refine: ctx.cfg.refine };
    let triangulation = |id: usize| -> Result<(SphericalTriangulation, Hashes)> {
        let p = ctx.load_param(id)?;
        let mesh = ctx.load_mesh(id)?;
        let mut inputs = p.inputs.clone();
        let (k, h) = ctx.layout.hash_out(&ctx.layout.param(id))?;
        inputs.insert(k, h);
        let q = p.parameterization;
        let tri = SphericalTriangulation::from_parts(&mesh, q.positions, q.u).map_err(|e| user(format!("mesh {id}: {e}")))?;
        Ok((tri, inputs))
    };
    let (reference, ref_inputs) = triangulation(r)?;
    let mut out = Vec::new();
    for id in ctx.mesh_ids() {
        let artifact = if id == r {
            let rot = Rotation::identity();
            AlignArtifact {
                format: ALIGN_FORMAT.into(),
                mesh_id: id,
                reference_id: r,
                bandwidth: opts.bandwidth,
                refine: opts.refine,
                euler_zyz: rot.euler_zyz(),
                rotation: rot,
                correlation: None,
                flat: false,
                inputs: ref_inputs.clone(),
            }
        } else {
            let (tri, mut inputs) = triangulation(id)?;
            let a = align_spheres(&reference, &tri, &opts).map_err(|e| internal(format!("aligning mesh {id}: {e}")))?;
            inputs.extend(ref_inputs.clone());
            AlignArtifact {
                format: ALIGN_FORMAT.into(),
                mesh_id: id,
                reference_id: r,
                bandwidth: opts.bandwidth,
                refine: opts.refine,
                euler_zyz: a.euler,
                rotation: a.rotation,
                correlation: Some(a.correlation),
                flat: a.flat,
                inputs,
            }
        };
        ctx.layout.write_json(&ctx.layout.align(id), &artifact)?;
        let angle = artifact.rotation.angle_to(&Rotation::identity());
        println!(
            "mesh {id} -> mesh {r}: rotation angle {angle:.4} rad, euler zyz [{:.4}, {:.4}, {:.4}]{}",
            artifact.euler_zyz[0],
            artifact.euler_zyz[1],
            artifact.euler_zyz[2],
            if artifact.flat { " (flat correlation, identity)" } else { "" }
        );
        out.push(artifact);
    }
    Ok(out)
}

// --------------------------------------------------------------- make-dataset

fn face_weights(ctx: &Context, state: &MeshState) -> Result<(FaceDistribution, &'static str, Option<(String, String)>)> {
    match ctx.cfg.intensity_path(state.id) {
        Some(path) => {
            let values = read_intensities(&path, state.mesh.n_vertices()).map_err(|e| user(format!("{}: {e}", path.display())))?;
            let probs = contact_probabilities(&values);
            let dist = face_distribution(&state.mesh, &probs).map_err(transport_error)?;
            Ok((dist, "intensity", Some((format!("intensity/{}", state.id), sha256_file(&path)?))))
        }
        None => Ok((FaceDistribution::by_area(&state.mesh).map_err(transport_error)?, "uniform", None)),
    }
}

/// Samples train and validation sets on every mesh and pools them.
pub fn make_dataset(ctx: &Context) -> Result<DatasetManifest> {
    let (n_train, n_val) = (ctx.cfg.train_samples, ctx.cfg.validation_samples);
    let mut inputs = Hashes::new();
    let mut outputs = Hashes::new();
    let mut entries = Vec::new();
    let (mut trains, mut vals) = (Vec::new(), Vec::new());
    for id in ctx.mesh_ids() {
        let state = ctx.load_state(id)?;
        inputs.extend(state.inputs.clone());
        let (dist, density, intensity_hash) = face_weights(ctx, &state)?;
        inputs.extend(intensity_hash);
        let seed = stage_seed(ctx.seed, "dataset", id as u64);
        let points = sample_surface(&state.mesh, &dist, n_train + n_val, seed).map_err(transport_error)?;
        let mut samples = to_sphere_dataset(&points, &state.tri, &state.rotation, id).map_err(transport_error)?;
        let val = samples.split_off(n_train);
        let (tr_rel, va_rel) = (ctx.layout.train_csv(id), ctx.layout.validation_csv(id));
        outputs.insert(Layout::key(&tr_rel), ctx.layout.write_bytes(&tr_rel, &dataset_bytes(&samples)?)?);
        outputs.insert(Layout::key(&va_rel), ctx.layout.write_bytes(&va_rel, &dataset_bytes(&val)?)?);
        println!("mesh {id}: {} train + {} validation samples ({density}, seed {seed})", samples.len(), val.len());
        entries.push(DatasetEntry {
            mesh_id: id,
            seed,
            density: density.into(),
            train: tr_rel,
            validation: va_rel,
            train_rows: samples.len(),
            validation_rows: val.len(),
        });
        trains.push(samples);
        vals.push(val);
    }
    let (pt, pv) = (ctx.layout.pooled_train_csv(), ctx.layout.pooled_validation_csv());
    let (pooled_t, pooled_v) = (pool(&trains), pool(&vals));
    outputs.insert(Layout::key(&pt), ctx.layout.write_bytes(&pt, &dataset_bytes(&pooled_t)?)?);
    outputs.insert(Layout::key(&pv), ctx.layout.write_bytes(&pv, &dataset_bytes(&pooled_v)?)?);
    println!("pooled: {} train + {} validation samples", pooled_t.len(), pooled_v.len());
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        root_seed: ctx.seed,
        meshes: entries,
        pooled_train: pt,
        pooled_validation: pv,
        inputs,
        outputs,
    };
    ctx.layout.write_json(&ctx.layout.dataset_manifest(), &manifest)?;
    Ok(manifest)
}

// ---------------------------------------------------------------------- train

/// Train and validation sets of the given meshes (all meshes: the pooled
/// files), plus the provenance of the files read.
pub fn training_data(ctx: &Context, manifest: &DatasetManifest, meshes: &[usize]) -> Result<(Vec<SphereSample>, Vec<SphereSample>, Hashes)> {
    let mut h = manifest.inputs.clone();
    let (mk, mh) = ctx.layout.hash_out(&ctx.layout.dataset_manifest())?;
    h.insert(mk, mh);
    if meshes.len() == manifest.meshes.len() {
        let t = ctx.read_dataset(&manifest.pooled_train)?;
        let v = ctx.read_dataset(&manifest.pooled_validation)?;
        for rel in [&manifest.pooled_train, &manifest.pooled_validation] {
            let k = Layout::key(rel);
            h.insert(k.clone(), manifest.outputs[&k].clone());
        }
        return Ok((t, v, h));
    }
    let (mut ts, mut vs) = (Vec::new(), Vec::new());
    for &id in meshes {
        let e = manifest.entry(id)?;
        ts.push(ctx.read_dataset(&e.train)?);
        vs.push(ctx.read_dataset(&e.validation)?);
        for rel in [&e.train, &e.validation] {
            let k = Layout::key(rel);
            h.insert(k.clone(), manifest.outputs[&k].clone());
        }
    }
    Ok((pool(&ts), pool(&vs), h))
}

/// Uniform-by-area points of the given meshes on the aligned sphere, for
/// mesh-sampled Moser constraints.
pub fn constraint_pool(ctx: &Context, meshes: &[usize], per_mesh: usize) -> Result<Vec<Vec3<f64>>> {
    let mut out = Vec::new();
    for &id in meshes {
        let s = ctx.load_state(id)?;
        let dist = FaceDistribution::by_area(&s.mesh).map_err(transport_error)?;
        let pts = sample_surface(&s.mesh, &dist, per_mesh, stage_seed(ctx.seed, "constraint", id as u64)).map_err(transport_error)?;
        out.extend(to_sphere_dataset(&pts, &s.tri, &s.rotation, id).map_err(transport_error)?.into_iter().map(|x| x.direction));
    }
    Ok(out)
}

/// Trains a model on the given meshes' data with a config derived from
/// `ctx` and `seed`.
pub fn fit(
    ctx: &Context,
    kind: FlowKind,
    train_set: &[SphereSample],
    validation: &[SphereSample],
    meshes: &[usize],
    seed: u64,
) -> Result<(FlowModel<f64>, TrainingLog, TrainConfig)> {
    let tc = ctx.cfg.train_config(kind, seed);
    let pool_points = if kind == FlowKind::Moser && tc.constraint_sampling == ConstraintSampling::Mesh {
        Some(constraint_pool(ctx, meshes, 4 * tc.moser_k)?)
    } else {
        None
    };
    let (model, log) = train::<f64>(kind, train_set, validation, &tc, pool_points.as_deref()).map_err(|e| match e {
        cgm_core::flows::TrainError::EmptyDataset | cgm_core::flows::TrainError::Config(_) => user(e.to_string()),
        other => internal(format!("training failed: {other}")),
    })?;
    Ok((model, log, tc))
}

/// Trains a `kind` model on all meshes (pooled) or on one mesh.
pub fn train_model(ctx: &Context, kind: FlowKind, mesh_id: Option<usize>) -> Result<ModelManifest> {
    let manifest = ctx.load_dataset_manifest()?;
    let meshes = match mesh_id {
        Some(id) => {
            ctx.cfg.check_mesh_id(id)?;
            vec![id]
        }
        None => manifest.meshes.iter().map(|e| e.mesh_id).collect(),
    };
    let name = model_name(kind, mesh_id);
    let (train_set, validation, inputs) = training_data(ctx, &manifest, &meshes)?;
    let seed = stage_seed(ctx.seed, &format!("train-{name}"), 0);
    let (model, log, tc) = fit(ctx, kind, &train_set, &validation, &meshes, seed)?;

    let mut ckpt = Vec::new();
    save_checkpoint(&mut ckpt, &model, Some(&tc)).map_err(|e| internal(e.to_string()))?;
    let mut log_csv = Vec::new();
    log.write_csv(&mut log_csv).map_err(|e| internal(e.to_string()))?;
    let mut wall = Vec::new();
    log.write_wall_time_csv(&mut wall).map_err(|e| internal(e.to_string()))?;
    let (mrel, lrel) = (ctx.layout.model(&name), ctx.layout.model_log(&name));
    let mut outputs = Hashes::new();
    outputs.insert(Layout::key(&mrel), ctx.layout.write_bytes(&mrel, &ckpt)?);
    outputs.insert(Layout::key(&lrel), ctx.layout.write_bytes(&lrel, &log_csv)?);
    ctx.layout.write_bytes(&ctx.layout.model_wall_time(&name), &wall)?;

    let last = log.epochs.last().expect("at least one epoch");
    let m = ModelManifest {
        format: MODEL_FORMAT.into(),
        name: name.clone(),
        kind,
        train_meshes: meshes,
        seed,
        final_train_ll: last.train_ll,
        final_validation_ll: last.validation_ll,
        inputs,
        outputs,
    };
    ctx.layout.write_json(&ctx.layout.model_manifest(&name), &m)?;
    match last.validation_ll {
        Some(v) => println!("{name}: {} epochs, final train LL {:.4}, final validation corrected LL {v:.4}", log.epochs.len(), last.train_ll),
        None => println!("{name}: {} epochs, final train LL {:.4}", log.epochs.len(), last.train_ll),
    }
    Ok(m)
}

// --------------------------------------------------------------------- sample

/// Sphere samples from a model (CNF: backward ODE; Moser: its sampling ODE).
pub fn sphere_samples(model: &FlowModel<f64>, n: usize, seed: u64, moser_steps: usize) -> Result<Vec<Vec3<f64>>> {
    match model.kind {
        FlowKind::Cnf => cnf_sample(model, n, seed, model.solver),
        FlowKind::Moser => moser_sample(model, n, seed, moser_steps, model.moser_eps),
    }
    .map_err(|e| internal(format!("sampling failed: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleOutput {
    pub csv: PathBuf,
    pub ply: PathBuf,
    pub points: Vec<SurfacePoint>,
    pub vertex_counts: Vec<u64>,
}

/// Draws `n` samples from the model and maps them onto mesh `mesh_id`.
pub fn sample(ctx: &Context, kind: FlowKind, model_path: Option<&Path>, mesh_id: usize, n: Option<usize>) -> Result<SampleOutput> {
    let state = ctx.load_state(mesh_id)?;
    let (model, label, _) = ctx.resolve_model(model_path, &model_name(kind, None))?;
    let n = n.unwrap_or(ctx.cfg.sample.n);
    if n == 0 {
        return Err(user("--n must be positive"));
    }
    let seed = stage_seed(ctx.seed, &format!("sample-{label}"), mesh_id as u64);
    let xs = sphere_samples(&model, n, seed, ctx.cfg.sample.moser_steps)?;
    let points = xs
        .iter()
        .map(|&x| from_sphere(x, &state.tri, &state.rotation))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| internal(e.to_string()))?;

    let mut counts = vec![0u64; state.mesh.n_vertices()];
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| internal(e.to_string());
    w.write_record(["mesh_id", "face_id", "b0", "b1", "b2", "x", "y", "z"]).map_err(csv_err)?;
    for sp in &points {
        let p = barycentric_point(&state.mesh, sp);
        let corner = (0..3).max_by(|&a, &b| sp.bary[a].total_cmp(&sp.bary[b])).expect("three corners");
        counts[state.mesh.faces()[sp.face][corner]] += 1;
        let row = [mesh_id.to_string(), sp.face.to_string()]
            .into_iter()
            .chain(sp.bary.iter().chain(p.iter()).map(|v| v.to_string()));
        w.write_record(row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| internal(e.to_string()))?;
    let csv_rel = format!("samples/{label}_mesh_{mesh_id}.csv");
    ctx.layout.write_bytes(&csv_rel, &bytes)?;

    let ply_rel = format!("samples/{label}_mesh_{mesh_id}.ply");
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    write_ply_file(ctx, &ply_rel, &state.mesh, &colormap::colors(&values), ("count", &values))?;
    println!("{n} samples from {label} on mesh {mesh_id} -> {}", ctx.layout.path(&csv_rel).display());
    Ok(SampleOutput { csv: ctx.layout.path(&csv_rel), ply: ctx.layout.path(&ply_rel), points, vertex_counts: counts })
}

fn write_ply_file(ctx: &Context, rel: &str, mesh: &TriangleMesh, colors: &[[u8; 3]], scalar: (&str, &[f64])) -> Result<()> {
    let path = ctx.layout.path(rel);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    write_ply(&path, mesh, Some(colors), Some(scalar)).map_err(|e| io(&path, e))
}

// ----------------------------------------------------------------------- eval

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshEvaluation {
    pub mesh_id: usize,
    #[serde(flatten)]
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub model: String,
    pub kind: FlowKind,
    pub dataset: String,
    pub pooled: Evaluation,
    pub meshes: Vec<MeshEvaluation>,
}

/// Per-sample corrected log likelihoods aggregated overall and per mesh id.
pub fn evaluate_samples(model: &FlowModel<f64>, data: &[SphereSample]) -> Result<(Evaluation, Vec<MeshEvaluation>)> {
    if data.is_empty() {
        return Err(user("evaluation dataset is empty"));
    }
    let ll = per_sample_log_likelihood(model, data).map_err(|e| internal(format!("evaluation failed: {e}")))?;
    let mut by_mesh: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (s, v) in data.iter().zip(&ll) {
        by_mesh.entry(s.mesh_id).or_default().push(*v);
    }
    let meshes = by_mesh.into_iter().map(|(mesh_id, v)| MeshEvaluation { mesh_id, evaluation: Evaluation::from_values(&v) }).collect();
    Ok((Evaluation::from_values(&ll), meshes))
}

/// Evaluates a model on a dataset file, or on the validation sets (pooled,
/// or one mesh's).
pub fn eval(ctx: &Context, kind: FlowKind, model_path: Option<&Path>, mesh_id: Option<usize>, dataset: Option<&Path>) -> Result<EvalReport> {
    let (model, label, _) = ctx.resolve_model(model_path, &model_name(kind, None))?;
    let (data, name) = match (dataset, mesh_id) {
        (Some(p), _) => (read_dataset_file(p)?, p.display().to_string()),
        (None, id) => {
            let m = ctx.load_dataset_manifest()?;
            let rel = match id {
                Some(id) => m.entry(id)?.validation.clone(),
                None => m.pooled_validation.clone(),
            };
            (ctx.read_dataset(&rel)?, rel)
        }
    };
    let data: Vec<SphereSample> = match (dataset, mesh_id) {
        (Some(_), Some(id)) => data.into_iter().filter(|s| s.mesh_id == id).collect(),
        _ => data,
    };
    let (pooled, meshes) = evaluate_samples(&model, &data)?;
    let report = EvalReport { model: label.clone(), kind: model.kind, dataset: name, pooled, meshes };
    let rel = match mesh_id {
        Some(id) => format!("reports/eval_{label}_mesh_{id}.json"),
        None => format!("reports/eval_{label}.json"),
    };
    ctx.layout.write_json(&rel, &report)?;
    println!("{label} on {}: corrected LL {:.4} ± {:.4} (n = {})", report.dataset, pooled.mean, pooled.stderr, pooled.n);
    for m in &report.meshes {
        println!("  mesh {}: {:.4} ± {:.4} (n = {})", m.mesh_id, m.evaluation.mean, m.evaluation.stderr, m.evaluation.n);
    }
    Ok(report)
}

// -------------------------------------------------------------- export-density

/// Source mesh refined `r` times per edge inside each face, with every new
/// vertex's location as a surface point of the original mesh.
pub fn refine_mesh(mesh: &TriangleMesh, r: usize) -> Result<(TriangleMesh, Vec<SurfacePoint>)> {
    let r = r.max(1);
    let mut index: BTreeMap<Vec<(usize, usize)>, usize> = BTreeMap::new();
    let mut points: Vec<SurfacePoint> = Vec::new();
    let mut faces = Vec::new();
    for (f, tri) in mesh.faces().iter().enumerate() {
        let mut id = |i: usize, j: usize| -> usize {
            let k = r - i - j;
            let mut key: Vec<(usize, usize)> = [(tri[0], i), (tri[1], j), (tri[2], k)].into_iter().filter(|&(_, w)| w > 0).collect();
            key.sort_unstable();
            *index.entry(key).or_insert_with(|| {
                points.push(SurfacePoint::new(f, [i, j, k].map(|w| w as f64 / r as f64)));
                points.len() - 1
            })
        };
        for i in 0..r {
            for j in 0..(r - i) {
                faces.push([id(i + 1, j), id(i, j + 1), id(i, j)]);
                if i + j + 1 < r {
                    faces.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
                }
            }
        }
    }
    let positions = points.iter().map(|sp| barycentric_point(mesh, sp)).collect();
    let refined = TriangleMesh::new(positions, faces).map_err(|e| internal(format!("refinement: {e}")))?;
    Ok((refined, points))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityOutput {
    pub ply: PathBuf,
    pub density: Vec<f64>,
}

/// Spherical model density at the aligned images of the mesh points.
pub fn sphere_density(model: &FlowModel<f64>, xs: &[Vec3<f64>]) -> Result<Vec<f64>> {
    match model.kind {
        FlowKind::Cnf => Ok(model.log_density(xs).map_err(|e| internal(e.to_string()))?.into_iter().map(f64::exp).collect()),
        FlowKind::Moser => Ok(moser_density(model, xs).into_iter().map(|m| m.max(model.moser_eps)).collect()),
    }
}

/// Writes a PLY of mesh `mesh_id` (refined `resolution` times per edge)
/// colored by the model's density on the mesh, `ρ(R f̃(p)) / Δ(f̃(p))`.
pub fn export_density(ctx: &Context, kind: FlowKind, model_path: Option<&Path>, mesh_id: usize, resolution: usize) -> Result<DensityOutput> {
    let state = ctx.load_state(mesh_id)?;
    let (model, label, _) = ctx.resolve_model(model_path, &model_name(kind, None))?;
    let (refined, points) = refine_mesh(&state.mesh, resolution)?;
    let mut aligned = Vec::with_capacity(points.len());
    let mut delta = Vec::with_capacity(points.len());
    for sp in &points {
        let x = state.tri.from_surface(sp).map_err(|e| internal(e.to_string()))?;
        aligned.push(state.rotation.apply(x));
        delta.push(state.tri.change_of_area(x, sp.face));
    }
    let rho = sphere_density(&model, &aligned)?;
    let density: Vec<f64> = rho.iter().zip(&delta).map(|(r, d)| r / d).collect();
    let rel = format!("exports/density_{label}_mesh_{mesh_id}.ply");
    write_ply_file(ctx, &rel, &refined, &colormap::colors(&density), ("density", &density))?;
    let (lo, hi) = density.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    println!("{label} density on mesh {mesh_id}: {} vertices, range [{lo:.4e}, {hi:.4e}] -> {}", refined.n_vertices(), ctx.layout.path(&rel).display());
    Ok(DensityOutput { ply: ctx.layout.path(&rel), density })
}
