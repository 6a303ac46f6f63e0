//! `manifest.toml`: what was run, with which seed and settings, and the
//! SHA-256 of every file written. The manifest parses as a run config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

pub const MANIFEST: &str = "manifest.toml";

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Collects the written files of one run.
#[derive(Debug)]
pub struct OutputDir {
    pub root: PathBuf,
    pub written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    /// Writes `name` through a buffered writer.
    pub fn write<F>(&mut self, name: &str, body: F) -> std::io::Result<()>
    where
        F: FnOnce(&mut std::io::BufWriter<fs::File>) -> std::io::Result<()>,
    {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(fs::File::create(self.root.join(name))?);
        body(&mut w)?;
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn artifacts(&self) -> std::io::Result<Vec<Artifact>> {
        self.written
            .iter()
            .map(|name| Ok(Artifact { path: name.clone(), sha256: sha256_file(&self.root.join(name))? }))
            .collect()
    }
}

/// Serializes the manifest: header keys, the resolved section under its own
/// name, then the artifact list.
pub fn render(subcommand: &str, section: &str, seed: u64, resolved: Value, artifacts: &[Artifact]) -> String {
    let mut t = Table::new();
    t.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    t.insert("subcommand".into(), Value::String(subcommand.into()));
    // TOML integers are signed 64-bit; seeds round-trip through the bit pattern.
    t.insert("seed".into(), Value::Integer(seed as i64));
    t.insert(section.into(), resolved);
    let list = artifacts.iter().map(|a| Value::try_from(a).expect("artifact serializes")).collect();
    t.insert("artifacts".into(), Value::Array(list));
    toml::to_string(&t).expect("manifest serializes")
}

pub fn write_manifest(out: &OutputDir, text: &str) -> std::io::Result<()> {
    fs::write(out.root.join(MANIFEST), text)
}
