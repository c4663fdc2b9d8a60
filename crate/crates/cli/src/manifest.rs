use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one command run, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub version: String,
    pub duration_s: f64,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub struct ManifestBuilder {
    command: String,
    started: Instant,
    inputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn start(command: &str) -> Self {
        Self { command: command.to_string(), started: Instant::now(), inputs: Vec::new() }
    }

    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    /// Writes the manifest to `dest`.
    pub fn finish(self, config: &impl Serialize, dest: &Path) -> anyhow::Result<()> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| Ok(InputDigest { path: p.clone(), sha256: sha256_file(p)? }))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let manifest = RunManifest {
            command: self.command,
            config: serde_json::to_value(config)?,
            inputs,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_s: self.started.elapsed().as_secs_f64(),
        };
        write_json(dest, &manifest)
    }
}

/// Manifest path for a single-file output: `name.ext` → `name.manifest.json`.
pub fn sidecar(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.manifest.json"))
}

pub fn write_json(dest: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(dest, &text)
}

pub fn write_text(dest: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = dest.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(dest, text).with_context(|| format!("writing {}", dest.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc.txt");
        std::fs::write(&p, "abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar(Path::new("out/table.csv")), PathBuf::from("out/table.manifest.json"));
        assert_eq!(sidecar(Path::new("report.json")), PathBuf::from("report.manifest.json"));
    }
}
