//! Drives the `cgm` binary inside a scratch project directory.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets/meshes")
}

pub fn asset(name: &str) -> String {
    assets().join(name).display().to_string()
}

pub struct Project {
    pub dir: tempfile::TempDir,
}

impl Project {
    pub fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("cgm.toml"), config).unwrap();
        Project { dir }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_cgm"))
            .current_dir(self.dir.path())
            .env_remove("CGM_OUTPUT_ROOT")
            .args(args)
            .output()
            .unwrap()
    }

    /// Runs and panics with stderr unless the exit status is 0.
    pub fn ok(&self, args: &[&str]) -> String {
        let o = self.run(args);
        assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    }

    pub fn code(&self, args: &[&str]) -> (i32, String) {
        let o = self.run(args);
        (o.status.code().unwrap(), String::from_utf8_lossy(&o.stderr).into_owned())
    }

    /// Contents of every file under `out/` except wall-time sidecars.
    pub fn artifacts(&self) -> BTreeMap<String, Vec<u8>> {
        let mut out = BTreeMap::new();
        let mut stack = vec![self.path("out")];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else if !p.to_string_lossy().contains("wall_time") {
                    out.insert(p.strip_prefix(self.dir.path()).unwrap().display().to_string(), fs::read(&p).unwrap());
                }
            }
        }
        out
    }

    pub fn json(&self, rel: &str) -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(self.path(rel)).unwrap()).unwrap()
    }
}

/// Config listing bundled meshes, followed by `extra` TOML.
pub fn config(meshes: &[&str], extra: &str) -> String {
    let list: Vec<String> = meshes.iter().map(|m| format!("{:?}", asset(m))).collect();
    format!("meshes = [{}]\n{extra}", list.join(", "))
}
