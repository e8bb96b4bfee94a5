//! KFold training of both models with per-fold fusion, and ensemble
//! prediction across folds.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{kfold_split, FoldAssignment, MetadataRecord};
use crate::error::{Error, Result};
use crate::fusion::{fuse_predict, fusion_weights, std_baseline, FusionWeights, StdBaseline, ValidationScores};
use crate::meta::{train_meta, EmbeddingTable, MetaNet, MetaNetConfig};
use crate::rng::{derive_seed, SeededRng};
use crate::vision::{
    train_image, ImageHeadConfig, ImageModel, ImageSample, ImageTensor, ReferenceBackbone, FIXTURE_EXTENSION,
};

// Stream indices under a fold seed.
const META_STREAM: u64 = 1;
const IMAGE_STREAM: u64 = 2;
const TTA_STREAM: u64 = 3;

#[derive(Clone, Debug)]
pub struct Sample {
    pub record: MetadataRecord,
    pub image: ImageTensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub folds: usize,
    pub seed: u64,
    pub meta: MetaNetConfig,
    pub image: ImageHeadConfig,
    pub backbone: ReferenceBackbone,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            folds: 10,
            seed: 0,
            meta: MetaNetConfig::default(),
            image: ImageHeadConfig::default(),
            backbone: ReferenceBackbone::default(),
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::contract(format!("need at least 2 folds, got {}", self.folds)));
        }
        self.meta.validate()?;
        self.image.validate()?;
        ReferenceBackbone::new(self.backbone.input, self.backbone.patch, self.backbone.embed_dim).map(|_| ())
    }

    pub fn fold_seed(&self, fold: usize) -> u64 {
        derive_seed(self.seed, fold as u64 + 1)
    }
}

/// What prediction needs from one fold: both models, the fusion weights
/// and the fold seed that keys the TTA streams.
#[derive(Clone, Debug)]
pub struct FoldPredictor {
    pub fold: usize,
    pub seed: u64,
    pub meta: MetaNet,
    pub image: ImageModel<ReferenceBackbone>,
    pub weights: FusionWeights,
}

impl FoldPredictor {
    /// Fused predictions in `[0, 1]`. The image side averages `tta_views`
    /// views, drawn from a stream keyed by fold seed and sample position.
    pub fn predict(&self, records: &[MetadataRecord], images: &[ImageTensor], tta_views: usize) -> Result<Vec<f64>> {
        if records.len() != images.len() {
            return Err(Error::contract("one image per record required"));
        }
        let meta = self.meta.predict(records)?;
        let tta_root = derive_seed(self.seed, TTA_STREAM);
        let spec = &self.image.config.augmentation;
        images
            .iter()
            .zip(meta)
            .enumerate()
            .map(|(i, (img, pm))| {
                let mut rng = SeededRng::new(derive_seed(tta_root, i as u64));
                let pp = self.image.tta_predict(img, spec, tta_views, &mut rng)?;
                Ok(fuse_predict(&self.weights, pm, pp))
            })
            .collect()
    }
}

/// A trained fold with the statistics behind its fusion weights.
#[derive(Clone, Debug)]
pub struct FoldModel {
    pub predictor: FoldPredictor,
    pub scores: ValidationScores,
    pub baseline: StdBaseline,
    pub n_train: usize,
    pub n_val: usize,
    pub meta_time: Duration,
    pub image_time: Duration,
}

impl FoldModel {
    pub fn weights(&self) -> FusionWeights {
        self.predictor.weights
    }
}

/// Extensions tried, in order, when looking up `<dir>/<id>.<ext>`.
pub const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", FIXTURE_EXTENSION];

pub fn find_image(dir: &Path, id: &str) -> Option<PathBuf> {
    IMAGE_EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{id}.{ext}")))
        .find(|p| p.is_file())
}

/// Loads the image of every record, from `image_path` when set and from
/// `dir` otherwise. Every id without an image is reported in one error.
pub fn load_images(records: &[MetadataRecord], dir: &Path) -> Result<Vec<ImageTensor>> {
    let paths: Vec<Option<PathBuf>> = records
        .iter()
        .map(|r| r.image_path.clone().filter(|p| p.is_file()).or_else(|| find_image(dir, &r.id)))
        .collect();
    let missing: Vec<String> = records
        .iter()
        .zip(&paths)
        .filter(|(_, p)| p.is_none())
        .map(|(r, _)| r.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingImages(missing));
    }
    paths.par_iter().map(|p| ImageTensor::load(p.as_ref().expect("checked above"))).collect()
}

pub fn load_samples(records: Vec<MetadataRecord>, dir: &Path) -> Result<Vec<Sample>> {
    let images = load_images(&records, dir)?;
    Ok(records
        .into_iter()
        .zip(images)
        .map(|(record, image)| Sample { record, image })
        .collect())
}

pub fn split(samples: &[Sample], settings: &TrainSettings) -> Result<FoldAssignment> {
    kfold_split(samples.len(), settings.folds, settings.seed)
}

pub fn train_fold<S: AsRef<str> + Sync>(
    samples: &[Sample],
    assignment: &FoldAssignment,
    fold: usize,
    table: &EmbeddingTable,
    schema: &[S],
    settings: &TrainSettings,
) -> Result<FoldModel> {
    let pick = |idx: &[usize]| idx.iter().map(|&i| &samples[i]).collect::<Vec<_>>();
    let train = pick(&assignment.training(fold));
    let val = pick(&assignment.validation(fold));
    let seed = settings.fold_seed(fold);

    let records = |s: &[&Sample]| s.iter().map(|x| x.record.clone()).collect::<Vec<_>>();
    let (train_rec, val_rec) = (records(&train), records(&val));
    let labels: Vec<f64> = train_rec
        .iter()
        .map(|r| r.label().ok_or_else(|| Error::contract(format!("record `{}` has no label", r.id))))
        .collect::<Result<_>>()?;
    let baseline = std_baseline(&labels)?;

    let start = Instant::now();
    let meta_cfg = MetaNetConfig {
        seed: derive_seed(seed, META_STREAM),
        ..settings.meta.clone()
    };
    let meta = train_meta(&train_rec, &val_rec, table, schema, &meta_cfg)?;
    let meta_time = start.elapsed();

    let start = Instant::now();
    let image_cfg = ImageHeadConfig {
        seed: derive_seed(seed, IMAGE_STREAM),
        ..settings.image.clone()
    };
    let image_samples = |s: &[&Sample]| {
        s.iter()
            .map(|x| ImageSample {
                id: x.record.id.clone(),
                image: x.image.clone(),
                label: x.record.pawpularity,
            })
            .collect::<Vec<_>>()
    };
    let image = train_image(&image_samples(&train), &image_samples(&val), settings.backbone.clone(), &image_cfg)?;
    let image_time = start.elapsed();

    let scores = ValidationScores {
        val_m: meta.val_rmse,
        val_p: image.val_rmse,
    };
    let weights = fusion_weights(scores, &baseline);
    log::info!(
        "fold {fold}: val_m {:.4} val_p {:.4} std {:.4} -> w_meta {:.4} w_pic {:.4}{}",
        scores.val_m,
        scores.val_p,
        baseline.std,
        weights.w_meta,
        weights.w_pic,
        if weights.degenerate { " (degenerate)" } else { "" }
    );
    Ok(FoldModel {
        predictor: FoldPredictor {
            fold,
            seed,
            meta: meta.model,
            image: image.model,
            weights,
        },
        scores,
        baseline,
        n_train: train.len(),
        n_val: val.len(),
        meta_time,
        image_time,
    })
}

/// Trains every fold, concurrently; results are in fold order.
pub fn train_folds<S: AsRef<str> + Sync>(
    samples: &[Sample],
    table: &EmbeddingTable,
    schema: &[S],
    settings: &TrainSettings,
) -> Result<Vec<FoldModel>> {
    settings.validate()?;
    let assignment = split(samples, settings)?;
    (0..settings.folds)
        .into_par_iter()
        .map(|f| train_fold(samples, &assignment, f, table, schema, settings))
        .collect()
}

/// Uniform mean over folds of the fused predictions, on the 0–100 scale.
pub fn predict_ensemble(
    folds: &[FoldPredictor],
    records: &[MetadataRecord],
    images: &[ImageTensor],
    tta_views: usize,
) -> Result<Vec<f64>> {
    if folds.is_empty() {
        return Err(Error::contract("no fold models to predict with"));
    }
    let per_fold: Vec<Vec<f64>> = folds
        .par_iter()
        .map(|f| f.predict(records, images, tta_views))
        .collect::<Result<_>>()?;
    Ok((0..records.len())
        .map(|i| 100.0 * per_fold.iter().map(|p| p[i]).sum::<f64>() / folds.len() as f64)
        .collect())
}
