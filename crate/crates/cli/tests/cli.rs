use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use cgm_core::flows::{save_checkpoint, FlowKind, FlowModel};
use cgm_core::mesh::generators;
use cgm_core::mesh::io::write_obj;
use cgm_core::transport::{write_dataset_csv, SphereSample};
use cgm_core::SurfacePoint;

mod common;
use common::{assets, Project};

fn zero_model(p: &Project, name: &str) -> String {
    let mut buf = Vec::new();
    save_checkpoint(&mut buf, &FlowModel::<f64>::zero(FlowKind::Cnf, vec![8]), None).unwrap();
    fs::write(p.path(name), buf).unwrap();
    name.to_string()
}

fn config(meshes: &[&str], extra: &str) -> String {
    common::config(meshes, &format!("bandwidth = 8\n{extra}"))
}

fn csv_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

const CHAIN: [&[&str]; 6] = [
    &["parameterize"],
    &["align"],
    &["make-dataset"],
    &["train", "--kind", "cnf"],
    &["sample", "--mesh-id", "1"],
    &["eval"],
];

#[test]
fn tetrahedron_smoke_chain_is_fast_and_deterministic() {
    let p = Project::new(&config(&["tetrahedron.obj"], "train_samples = 1000\nvalidation_samples = 1000\n[train]\nepochs = 5\n[sample]\nn = 2000\n"));
    let t = Instant::now();
    for args in CHAIN {
        p.ok(args);
    }
    assert!(t.elapsed().as_secs_f64() < 60.0);
    let first = p.artifacts();
    assert!(first.contains_key("out/models/cnf.json"));
    assert!(first.contains_key("out/reports/eval_cnf.json"));

    // every stage rerun reproduces every artifact byte for byte
    for args in CHAIN {
        p.ok(args);
    }
    p.ok(&["export-density", "--mesh-id", "1"]);
    let exported = fs::read(p.path("out/exports/density_cnf_mesh_1.ply")).unwrap();
    p.ok(&["export-density", "--mesh-id", "1"]);
    assert_eq!(exported, fs::read(p.path("out/exports/density_cnf_mesh_1.ply")).unwrap());
    let mut second = p.artifacts();
    second.remove("out/exports/density_cnf_mesh_1.ply");
    assert_eq!(first, second);

    // samples are valid surface points
    let text = fs::read_to_string(p.path("out/samples/cnf_mesh_1.csv")).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let sp = SurfacePoint::new(v[1] as usize, [v[2], v[3], v[4]]);
        assert!(sp.face < 4 && sp.is_valid(1e-9), "{line}");
        rows += 1;
    }
    assert_eq!(rows, 2000);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.path("out/reports/eval_cnf.json")).unwrap()).unwrap();
    assert_eq!(report["pooled"]["n"], 1000);
    assert!(report["pooled"]["mean"].as_f64().unwrap().is_finite());
}

#[test]
fn torus_is_rejected_with_exit_code_2() {
    let p = Project::new("meshes = [\"ring.obj\", \"tet.obj\"]\n");
    write_obj(p.path("ring.obj"), &generators::torus::<f64>(12, 8, 1.0, 0.3)).unwrap();
    write_obj(p.path("tet.obj"), &generators::tetrahedron::<f64>()).unwrap();
    let (code, err) = p.code(&["parameterize"]);
    assert_eq!(code, 2);
    assert!(err.contains("ring.obj"), "{err}");
    assert!(err.contains("topological sphere"), "{err}");
    // the valid mesh was still processed
    assert!(p.path("out/param/mesh_2.json").exists());
}

#[test]
fn user_errors_exit_with_2() {
    let p = Project::new(&config(&["tetrahedron.obj"], ""));
    assert_eq!(p.code(&["train"]).0, 2, "missing dataset");
    assert_eq!(p.code(&["align"]).0, 2, "missing parameterization");
    assert_eq!(p.code(&["--config", "nope.toml", "align"]).0, 2);
    assert_eq!(p.code(&["sample", "--kind", "flow", "--mesh-id", "1"]).0, 2);
    p.ok(&["parameterize"]);
    assert_eq!(p.code(&["parameterize", "--mesh-id", "3"]).0, 2);
}

#[test]
fn stale_chains_are_refused() {
    let p = Project::new("meshes = [\"m.obj\"]\nbandwidth = 8\ntrain_samples = 50\nvalidation_samples = 50\n[train]\nepochs = 1\n");
    fs::copy(assets().join("icosahedron.obj"), p.path("m.obj")).unwrap();
    for args in &CHAIN[..3] {
        p.ok(args);
    }
    // same mesh, different file contents
    let mut text = fs::read_to_string(p.path("m.obj")).unwrap();
    text.push_str("# edited\n");
    fs::write(p.path("m.obj"), text).unwrap();
    let (code, err) = p.code(&["train"]);
    assert_eq!(code, 2);
    assert!(err.contains("stale"), "{err}");
    p.ok(&["parameterize"]);
    p.ok(&["align"]);
    assert_eq!(p.code(&["train"]).0, 2, "dataset still predates the new alignment");
    p.ok(&["make-dataset"]);
    p.ok(&["train"]);
    // tampering with a dataset file is detected too
    let csv = p.path("out/data/pooled_train.csv");
    let mut data = fs::read_to_string(&csv).unwrap();
    data.push_str(&data.lines().nth(1).unwrap().to_string());
    data.push('\n');
    fs::write(&csv, data).unwrap();
    assert_eq!(p.code(&["train"]).0, 2);
}

#[test]
fn alignment_of_one_and_of_duplicates() {
    let single = Project::new(&config(&["icosahedron.obj"], ""));
    single.ok(&["parameterize"]);
    single.ok(&["align"]);
    let a: serde_json::Value = serde_json::from_str(&fs::read_to_string(single.path("out/align/mesh_1.json")).unwrap()).unwrap();
    let r: Vec<f64> = a["rotation"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(r, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    assert!(!single.path("out/align/mesh_2.json").exists());

    let dup = Project::new(&config(&["blob.obj", "blob.obj", "blob.obj"], "bandwidth = 16\n").replace("bandwidth = 8\n", ""));
    dup.ok(&["parameterize"]);
    dup.ok(&["align"]);
    for id in 1..=3 {
        let a: serde_json::Value = serde_json::from_str(&fs::read_to_string(dup.path(&format!("out/align/mesh_{id}.json"))).unwrap()).unwrap();
        let r: Vec<f64> = a["rotation"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        let angle = (((r[0] + r[4] + r[8]) - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
        assert!(angle < PI / 16.0, "mesh {id}: {angle}");
    }
}

#[test]
fn dataset_splits_and_pooling() {
    let p = Project::new(&config(&["icosphere2.obj"], ""));
    p.ok(&["parameterize"]);
    p.ok(&["align"]);
    p.ok(&["make-dataset"]);
    assert_eq!(csv_rows(&p.path("out/data/mesh_1_train.csv")), 5000);
    assert_eq!(csv_rows(&p.path("out/data/mesh_1_validation.csv")), 5000);

    let two = Project::new(&config(&["blob_family_1.obj", "blob_family_2.obj"], "train_samples = 300\nvalidation_samples = 200\nintensities = [\"a.txt\", \"b.txt\"]\n"));
    fs::copy(assets().join("blob_family_1.intensity.txt"), two.path("a.txt")).unwrap();
    fs::copy(assets().join("blob_family_2.intensity.txt"), two.path("b.txt")).unwrap();
    two.ok(&["parameterize"]);
    two.ok(&["align"]);
    two.ok(&["make-dataset"]);
    let first = two.artifacts();
    two.ok(&["make-dataset"]);
    assert_eq!(first, two.artifacts());
    assert_eq!(csv_rows(&two.path("out/data/pooled_train.csv")), 600);
    assert_eq!(csv_rows(&two.path("out/data/pooled_validation.csv")), 400);
    let pooled = fs::read_to_string(two.path("out/data/pooled_train.csv")).unwrap();
    let ids: Vec<&str> = pooled.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert!(ids[..300].iter().all(|&i| i == "1") && ids[300..].iter().all(|&i| i == "2"));
    // a different root seed gives different data
    two.ok(&["--seed", "9", "make-dataset"]);
    assert_ne!(first["out/data/pooled_train.csv"], fs::read(two.path("out/data/pooled_train.csv")).unwrap());
}

#[test]
fn zero_model_samples_follow_spherical_areas() {
    let p = Project::new(&config(&["tetrahedron.obj"], ""));
    p.ok(&["parameterize"]);
    p.ok(&["align"]);
    let model = zero_model(&p, "zero.json");
    let n = 100_000;
    p.ok(&["sample", "--model", &model, "--mesh-id", "1", "--n", &n.to_string()]);

    let mesh = cgm_core::mesh::io::load_mesh::<f64>(assets().join("tetrahedron.obj"), None).unwrap();
    let art: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.path("out/param/mesh_1.json")).unwrap()).unwrap();
    let param: cgm_core::SphericalParameterization = serde_json::from_value(art["parameterization"].clone()).unwrap();
    let tri = cgm_core::SphericalTriangulation::new(&mesh, &param).unwrap();

    let mut counts = [0usize; 4];
    for line in fs::read_to_string(p.path("out/samples/zero_mesh_1.csv")).unwrap().lines().skip(1) {
        counts[line.split(',').nth(1).unwrap().parse::<usize>().unwrap()] += 1;
    }
    for f in 0..4 {
        let q = tri.spherical_area(f) / (4.0 * PI);
        let sigma = (n as f64 * q * (1.0 - q)).sqrt();
        assert!((counts[f] as f64 - n as f64 * q).abs() < 3.0 * sigma, "face {f}: {} vs {}", counts[f], n as f64 * q);
    }
    let ply = fs::read_to_string(p.path("out/samples/zero_mesh_1.ply")).unwrap();
    assert!(ply.contains("property double count"));
}

#[test]
fn zero_model_reports() {
    let p = Project::new(&config(&["icosphere3.obj"], ""));
    p.ok(&["parameterize"]);
    p.ok(&["align"]);
    let model = zero_model(&p, "zero.json");

    // Δ ≡ 1 dataset: exactly the uniform log density
    let samples: Vec<SphereSample> = (0..50)
        .map(|i| {
            let t = i as f64 * 0.1;
            SphereSample {
                direction: [t.cos() * 0.6, t.sin() * 0.6, 0.8],
                mesh_id: 1,
                source: SurfacePoint::new(0, [1.0, 0.0, 0.0]),
                log_area_correction: 0.0,
            }
        })
        .collect();
    let mut buf = Vec::new();
    write_dataset_csv(&mut buf, &samples).unwrap();
    fs::write(p.path("flat.csv"), buf).unwrap();
    p.ok(&["eval", "--model", &model, "--dataset", "flat.csv"]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.path("out/reports/eval_zero.json")).unwrap()).unwrap();
    assert_eq!(r["pooled"]["mean"].as_f64().unwrap(), -(4.0 * PI).ln());
    assert_eq!(r["pooled"]["stderr"].as_f64().unwrap(), 0.0);

    p.ok(&["export-density", "--model", &model, "--mesh-id", "1", "--resolution", "2"]);
    let ply = fs::read_to_string(p.path("out/exports/density_zero_mesh_1.ply")).unwrap();
    let header_end = ply.lines().position(|l| l == "end_header").unwrap();
    let n_vertices: usize = ply.lines().find_map(|l| l.strip_prefix("element vertex ")).unwrap().parse().unwrap();
    let density: Vec<f64> =
        ply.lines().skip(header_end + 1).take(n_vertices).map(|l| l.split(' ').last().unwrap().parse().unwrap()).collect();
    assert_eq!(n_vertices, 642 + 1920);
    assert!(density.iter().all(|d| d.is_finite() && *d > 0.0));
    let (lo, hi) = density.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &d| (a.min(d), b.max(d)));
    assert!(hi / lo < 1.05, "ratio {}", hi / lo);
}

#[test]
fn output_root_overrides() {
    let p = Project::new(&config(&["tetrahedron.obj"], "output_dir = \"artifacts\"\n"));
    p.ok(&["parameterize"]);
    assert!(p.path("artifacts/param/mesh_1.json").exists());
    let env_root = p.path("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_cgm"))
        .current_dir(p.dir.path())
        .env("CGM_OUTPUT_ROOT", &env_root)
        .arg("parameterize")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env_root.join("param/mesh_1.json").exists());
    p.ok(&["--out", "flag", "parameterize"]);
    assert!(p.path("flag/param/mesh_1.json").exists());
}

#[test]
fn example_config_loads() {
    let cfg = cgm_cli::PipelineConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/blob_family.toml")).unwrap();
    assert_eq!(cfg.n_meshes(), 5);
    for id in 1..=5 {
        assert!(cfg.mesh_path(id).exists());
        assert!(cfg.intensity_path(id).unwrap().exists());
    }
    assert_eq!(cfg.train_config(FlowKind::Moser, 0).epochs, 4000);
}
