//! Writes the bundled meshes and blob-family intensities to `assets/meshes`.
//!
//! Usage: `cargo run -p cgm-core --example make_meshes [out_dir]`

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use cgm_core::mesh::generators::{blob_family, cap_intensity, test_set};
use cgm_core::mesh::io::write_obj;

/// Surface direction the synthetic contact cap is centered on.
pub const CAP_CENTER: [f64; 3] = [0.6, 0.3, 0.75];
pub const CAP_KAPPA: f64 = 6.0;

fn main() -> std::io::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/meshes"));
    fs::create_dir_all(&out)?;
    for (name, mesh) in test_set() {
        write_obj(out.join(format!("{name}.obj")), &mesh)?;
        println!("{name}: {} vertices", mesh.n_vertices());
    }
    for (name, mesh) in blob_family() {
        write_obj(out.join(format!("{name}.obj")), &mesh)?;
        let mut f = fs::File::create(out.join(format!("{name}.intensity.txt")))?;
        for v in cap_intensity(&mesh, CAP_CENTER, CAP_KAPPA) {
            writeln!(f, "{v}")?;
        }
        println!("{name}: {} vertices", mesh.n_vertices());
    }
    Ok(())
}
