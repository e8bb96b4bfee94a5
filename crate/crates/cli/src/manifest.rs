//! Run manifest: config snapshot, per-fold metrics and artifact checksums.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldEntry {
    pub fold: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_val: usize,
    pub val_meta: f64,
    pub val_image: f64,
    pub std: f64,
    pub label_mean: f64,
    pub w_meta: f64,
    pub w_pic: f64,
    pub degenerate: bool,
    /// Paths relative to the run directory.
    pub meta_checkpoint: String,
    pub image_checkpoint: String,
    pub fusion_report: String,
    pub meta_seconds: f64,
    pub image_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub config: RunConfig,
    pub folds: Vec<FoldEntry>,
    pub total_seconds: f64,
    /// SHA-256 of every artifact, keyed by path relative to the run directory.
    pub checksums: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let m: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if m.version != MANIFEST_VERSION {
            bail!("manifest version {} is not supported", m.version);
        }
        Ok(m)
    }

    /// Every listed artifact must exist with its recorded checksum.
    pub fn verify(&self, run_dir: &Path) -> Result<()> {
        for (rel, want) in &self.checksums {
            let got = sha256_file(&run_dir.join(rel)).with_context(|| format!("artifact {rel}"))?;
            if &got != want {
                bail!("checksum mismatch for {rel}: manifest {want}, file {got}");
            }
        }
        for f in &self.folds {
            for rel in [&f.meta_checkpoint, &f.image_checkpoint] {
                if !self.checksums.contains_key(rel) {
                    bail!("fold {} references {rel}, which has no checksum", f.fold);
                }
            }
        }
        Ok(())
    }

    pub fn write(&self, run_dir: &Path) -> Result<PathBuf> {
        let path = run_dir.join(MANIFEST_FILE);
        write_atomic(&path, (serde_json::to_string_pretty(self)? + "\n").as_bytes())?;
        Ok(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).with_context(|| format!("reading {}", path.display()))?))
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().context("path has no file name")?.to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("moving {} into place", path.display()))?;
    Ok(())
}
