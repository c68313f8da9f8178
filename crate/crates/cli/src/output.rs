//! Output directories: artifact files plus one `manifest.json` with digests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::failure::Failure;

pub const MANIFEST: &str = "manifest.json";

/// Pretty JSON with object keys sorted, newline-terminated.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let value = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

pub fn sha256_file(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub struct RunDir {
    root: PathBuf,
    outputs: Vec<String>,
    inputs: BTreeMap<String, String>,
    started: String,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(root).map_err(|e| Failure::Io(format!("{}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            outputs: Vec::new(),
            inputs: BTreeMap::new(),
            started: now(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Registers a file written by other means.
    pub fn track(&mut self, rel: &str) {
        if !self.outputs.iter().any(|o| o == rel) {
            self.outputs.push(rel.to_string());
        }
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Failure::Io(format!("{}: {e}", parent.display())))?;
        }
        fs::write(&path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        self.track(rel);
        Ok(())
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<(), Failure> {
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), Failure> {
        let text = to_json(value)?;
        self.write_text(rel, &text)
    }

    pub fn record_input(&mut self, path: &Path) -> Result<(), Failure> {
        let digest = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Writes the manifest; output digests are taken from the files on disk.
    pub fn finish(self, command: &str, cfg: &Config, summary: Value, failure: Option<&Failure>) -> Result<(), Failure> {
        let mut outputs = BTreeMap::new();
        for rel in &self.outputs {
            outputs.insert(rel.clone(), sha256_file(&self.path(rel))?);
        }
        let grid = cfg.grid().ok();
        let manifest = json!({
            "command": command,
            "version": format!("dslab-cli {} / dslab {}", env!("CARGO_PKG_VERSION"), dslab::VERSION),
            "config": cfg.entries(),
            "config_digest": cfg.digest(),
            "grid": grid.map(|g| json!({ "n": g.n, "len": g.len, "spacing": [g.spacing(0), g.spacing(1), g.spacing(2)] })),
            "params": { "c1": cfg.get("model.c1"), "c2": cfg.get("model.c2"), "alpha": cfg.get("model.alpha") },
            "conventions": {
                "zero_mode": cfg.get("model.zero_mode"),
                "dft": "forward unnormalized, inverse scaled by 1/N",
                "storage": "row-major, x3 fastest",
                "coordinates": "x_j = (j - n/2) h on each axis",
                "snapshot": "DS3F v1: 64-byte header, little-endian f64 (re, im) pairs",
            },
            "started": self.started,
            "finished": now(),
            "inputs": self.inputs,
            "outputs": outputs,
            "exit_code": failure.map_or(0, Failure::exit_code),
            "failure": failure.map(|f| json!({ "kind": f.kind(), "message": f.message() })),
            "summary": summary,
        });
        let text = to_json(&manifest)?;
        let path = self.root.join(MANIFEST);
        fs::write(&path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_keys_are_sorted() {
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: u8,
        }
        let text = to_json(&S { zeta: 1, alpha: 2 }).unwrap();
        assert!(text.find("alpha").unwrap() < text.find("zeta").unwrap());
    }

    #[test]
    fn manifest_digests_match_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = RunDir::create(dir.path()).unwrap();
        run.write_text("a/b.txt", "hello").unwrap();
        run.finish("test", &Config::default(), Value::Null, None).unwrap();
        let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
        assert_eq!(
            manifest["outputs"]["a/b.txt"],
            sha256_file(&dir.path().join("a/b.txt")).unwrap()
        );
        assert_eq!(manifest["exit_code"], 0);
    }
}
