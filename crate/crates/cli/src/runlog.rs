//! Run manifests: a JSON record of flags, seed and input hashes written
//! beside each command's outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub args: Vec<String>,
    pub seed: u64,
    /// Input path → sha256 (directories hash every file beneath them).
    pub inputs: BTreeMap<String, String>,
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if !path.to_string_lossy().ends_with(".run.json") {
            out.push(path);
        }
    }
    Ok(())
}

pub fn hash_path(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, &mut files)?;
        files.sort();
        for f in files {
            let rel = f.strip_prefix(path).unwrap_or(&f);
            hasher.update(rel.to_string_lossy().as_bytes());
            hasher.update([0u8]);
            hasher.update(fs::read(&f).with_context(|| format!("reading {}", f.display()))?);
        }
    } else {
        hasher.update(fs::read(path).with_context(|| format!("reading {}", path.display()))?);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl RunManifest {
    pub fn new(subcommand: &str, args: Vec<String>, seed: u64, inputs: &[&Path]) -> Result<Self> {
        let mut hashed = BTreeMap::new();
        for p in inputs {
            hashed.insert(p.display().to_string(), hash_path(p)?);
        }
        Ok(Self {
            tool: "surgnn",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            args,
            seed,
            inputs: hashed,
        })
    }

    /// Writes `<out>/<subcommand>.run.json` when `out` is a directory and
    /// `<out stem>.run.json` next to it otherwise.
    pub fn write_beside(&self, out: &Path) -> Result<PathBuf> {
        let path = if out.is_dir() {
            out.join(format!("{}.run.json", self.subcommand))
        } else {
            let stem = out
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            out.with_file_name(format!("{stem}.run.json"))
        };
        surgnn::canonical::write_json(&path, self)?;
        Ok(path)
    }
}
