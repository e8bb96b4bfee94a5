//! Run configuration: one TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pawfuse::data::HashAlgorithm;
use pawfuse::meta::MetaNetConfig;
use pawfuse::pipeline::TrainSettings;
use pawfuse::vision::{ImageHeadConfig, ReferenceBackbone};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub train_csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
    pub image_dir: Option<PathBuf>,
    /// Images of the test CSV; defaults to `image_dir`.
    pub test_image_dir: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Paths {
    /// Makes relative paths relative to `base`.
    fn rebase(&mut self, base: &Path) {
        for p in [
            &mut self.train_csv,
            &mut self.test_csv,
            &mut self.image_dir,
            &mut self.test_image_dir,
            &mut self.embeddings,
            &mut self.annotations,
            &mut self.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub folds: usize,
    pub seed: u64,
    pub tta: usize,
    /// Largest Hamming distance reported as a duplicate.
    pub threshold: u32,
    pub hash: HashAlgorithm,
    pub meta: MetaNetConfig,
    pub image: ImageHeadConfig,
    pub backbone: ReferenceBackbone,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            folds: 10,
            seed: 0,
            tta: 4,
            threshold: 0,
            hash: HashAlgorithm::Average,
            meta: MetaNetConfig::default(),
            image: ImageHeadConfig::default(),
            backbone: ReferenceBackbone::default(),
        }
    }
}

/// Values given on the command line; each replaces the file's value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threshold: Option<u32>,
    pub folds: Option<usize>,
    pub tta: Option<usize>,
    pub train_csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
    pub image_dir: Option<PathBuf>,
    pub test_image_dir: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.paths.rebase(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Loads `path` if given, then applies the overrides.
    pub fn resolve(path: Option<&Path>, o: Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        let p = &mut cfg.paths;
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        set!(cfg.seed, o.seed);
        set!(cfg.threshold, o.threshold);
        set!(cfg.folds, o.folds);
        set!(cfg.tta, o.tta);
        for (dst, src) in [
            (&mut p.out_dir, o.out),
            (&mut p.train_csv, o.train_csv),
            (&mut p.test_csv, o.test_csv),
            (&mut p.image_dir, o.image_dir),
            (&mut p.test_image_dir, o.test_image_dir),
            (&mut p.embeddings, o.embeddings),
            (&mut p.annotations, o.annotations),
        ] {
            if src.is_some() {
                *dst = src;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold > 64 {
            bail!("threshold must be in 0..=64, got {}", self.threshold);
        }
        if self.tta == 0 {
            bail!("tta must be at least 1");
        }
        self.settings().validate()?;
        Ok(())
    }

    pub fn settings(&self) -> TrainSettings {
        TrainSettings {
            folds: self.folds,
            seed: self.seed,
            meta: self.meta.clone(),
            image: ImageHeadConfig {
                tta_views: self.tta,
                ..self.image.clone()
            },
            backbone: self.backbone.clone(),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("pawfuse-out"))
    }
}

/// The path in `value`, or an error naming the missing setting.
pub fn require<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    match value {
        Some(p) => Ok(p),
        None => bail!("no {what} given (set it in the config or pass --{})", what.replace(' ', "-")),
    }
}
