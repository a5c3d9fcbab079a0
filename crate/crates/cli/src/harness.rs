//! Repeated-run drivers: per-mesh likelihood table over several seeds, and
//! the held-out-mesh pooling experiment.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use cgm_core::flows::FlowKind;

use crate::artifacts::stage_seed;
use crate::error::{internal, user, Result};
use crate::pipeline::{evaluate_samples, fit, training_data, Context};

/// Mean and sample standard deviation (`n − 1`; 0 for a single run).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    (mean, (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub mesh_id: usize,
    pub mesh: String,
    pub kind: FlowKind,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

fn csv_bytes<S: Serialize>(rows: &[S]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| internal(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct TableRun {
    seed: u64,
    mesh_id: usize,
    kind: FlowKind,
    validation_ll: f64,
    stderr: f64,
}

/// For every mesh and kind: one model per harness seed trained on that
/// mesh's data, scored on its validation set. Writes per-run and summary
/// CSVs and a Markdown table of `mean ± std`.
pub fn table(ctx: &Context, kinds: &[FlowKind]) -> Result<Vec<TableRow>> {
    let manifest = ctx.load_dataset_manifest()?;
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    for &kind in kinds {
        for id in ctx.mesh_ids() {
            let (t, v, _) = training_data(ctx, &manifest, &[id])?;
            let mut lls = Vec::new();
            for &s in &ctx.cfg.harness.seeds {
                let (model, _, _) = fit(ctx, kind, &t, &[], &[id], stage_seed(s, &format!("table-{kind}"), id as u64))?;
                let (e, _) = evaluate_samples(&model, &v)?;
                runs.push(TableRun { seed: s, mesh_id: id, kind, validation_ll: e.mean, stderr: e.stderr });
                lls.push(e.mean);
            }
            let (mean, std) = mean_std(&lls);
            let mesh = ctx.cfg.meshes[id - 1].display().to_string();
            println!("{kind} mesh {id} ({mesh}): {mean:.3} ± {std:.3} over {} runs", lls.len());
            rows.push(TableRow { mesh_id: id, mesh, kind, mean, std, runs: lls.len() });
        }
    }
    ctx.layout.write_bytes("reports/table_runs.csv", &csv_bytes(&runs)?)?;
    ctx.layout.write_bytes("reports/table.csv", &csv_bytes(&rows)?)?;
    let mut md = String::from("| mesh | model | log likelihood |\n|---|---|---|\n");
    for r in &rows {
        md.push_str(&format!("| {} | {} | {:.3} ± {:.3} |\n", r.mesh, r.kind, r.mean, r.std));
    }
    ctx.layout.write_bytes("reports/table.md", md.as_bytes())?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeldoutRun {
    pub seed: u64,
    pub heldout_mesh: usize,
    pub k: usize,
    /// Training mesh ids joined with `;`.
    pub train_meshes: String,
    pub heldout_ll: f64,
    pub stderr: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeldoutSummary {
    pub k: usize,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

/// Held-out pooling experiment. Run `r` (harness seed `s`) holds out mesh
/// `r mod n + 1`, orders the rest by a shuffle seeded from `s`, and for
/// each `k` trains on the first `k` of them. The score is the corrected LL
/// on the held-out mesh's validation set.
pub fn heldout(ctx: &Context, kind: FlowKind) -> Result<(Vec<HeldoutRun>, Vec<HeldoutSummary>)> {
    let manifest = ctx.load_dataset_manifest()?;
    let n = ctx.cfg.n_meshes();
    if n < 2 {
        return Err(user("the held-out harness needs at least two meshes"));
    }
    let ks: Vec<usize> = ctx.cfg.harness.heldout_k.iter().copied().filter(|&k| (1..n).contains(&k)).collect();
    if ks.is_empty() {
        return Err(user(format!("harness.heldout_k has no value in 1..={}", n - 1)));
    }
    let mut runs = Vec::new();
    for (r, &s) in ctx.cfg.harness.seeds.iter().enumerate() {
        let held = r % n + 1;
        let mut rest: Vec<usize> = (1..=n).filter(|&i| i != held).collect();
        rest.shuffle(&mut ChaCha8Rng::seed_from_u64(stage_seed(s, "heldout-order", held as u64)));
        let target = ctx.read_dataset(&manifest.entry(held)?.validation)?;
        for &k in &ks {
            let chosen = &rest[..k];
            let (t, _, _) = training_data(ctx, &manifest, chosen)?;
            let (model, _, _) = fit(ctx, kind, &t, &[], chosen, stage_seed(s, &format!("heldout-{kind}"), k as u64))?;
            let (e, _) = evaluate_samples(&model, &target)?;
            let names = chosen.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";");
            println!("seed {s}: held out mesh {held}, k = {k} (meshes {names}): corrected LL {:.4} ± {:.4}", e.mean, e.stderr);
            runs.push(HeldoutRun { seed: s, heldout_mesh: held, k, train_meshes: names, heldout_ll: e.mean, stderr: e.stderr, n: e.n });
        }
    }
    let summary: Vec<HeldoutSummary> = ks
        .iter()
        .map(|&k| {
            let v: Vec<f64> = runs.iter().filter(|r| r.k == k).map(|r| r.heldout_ll).collect();
            let (mean, std) = mean_std(&v);
            HeldoutSummary { k, mean, std, runs: v.len() }
        })
        .collect();
    for s in &summary {
        println!("k = {}: {:.4} ± {:.4} over {} runs", s.k, s.mean, s.std, s.runs);
    }
    ctx.layout.write_bytes(&format!("reports/heldout_{kind}.csv"), &csv_bytes(&runs)?)?;
    ctx.layout.write_bytes(&format!("reports/heldout_{kind}_summary.csv"), &csv_bytes(&summary)?)?;
    Ok((runs, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_standard_deviation() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
