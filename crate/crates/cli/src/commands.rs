//! The four subcommands. Each returns the paths it wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use pawfuse::checkpoint::Checkpoint;
use pawfuse::data::{
    eda_report, find_duplicates, parse_annotations, parse_csv, write_predictions, DuplicateGroup, HashedItem,
    ImageInfo, MetadataRecord, PerceptualHash, CSV_HEADERS,
};
use pawfuse::fusion::{FusionReport, FusionWeights};
use pawfuse::meta::{EmbeddingTable, MetaNet};
use pawfuse::pipeline::{find_image, load_images, load_samples, predict_ensemble, train_folds, FoldPredictor, IMAGE_EXTENSIONS};
use pawfuse::vision::{ImageModel, ImageTensor};
use pawfuse::Error;
use rayon::prelude::*;

use crate::config::{require, RunConfig};
use crate::manifest::{sha256_hex, write_atomic, FoldEntry, RunManifest, MANIFEST_VERSION};

pub const DUPLICATES_FILE: &str = "duplicates.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

fn read_records(path: &Path) -> Result<Vec<MetadataRecord>> {
    parse_csv(path).with_context(|| format!("reading {}", path.display()))
}

/// Loads and hashes the image of each record; failures are logged and skipped.
fn image_infos(records: &[MetadataRecord], dir: &Path, cfg: &RunConfig) -> Vec<ImageInfo> {
    records
        .par_iter()
        .filter_map(|r| {
            let Some(path) = find_image(dir, &r.id) else {
                log::warn!("no image for `{}` in {}", r.id, dir.display());
                return None;
            };
            match ImageTensor::load(&path) {
                Ok(img) => Some(ImageInfo::of(r.id.clone(), &img, cfg.hash)),
                Err(e) => {
                    log::warn!("skipping `{}`: {e}", r.id);
                    None
                }
            }
        })
        .collect()
}

pub fn cmd_eda(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let records = read_records(require(&cfg.paths.train_csv, "train csv")?)?;
    let dir = require(&cfg.paths.image_dir, "image dir")?;
    let annotations = match &cfg.paths.annotations {
        Some(p) => Some(parse_annotations(fs::File::open(p).with_context(|| format!("opening {}", p.display()))?)?),
        None => None,
    };
    let infos = image_infos(&records, dir, cfg);
    let report = eda_report(&records, &infos, annotations.as_ref(), cfg.threshold)?;
    log::info!(
        "{} records, {} images, {} duplicate groups",
        report.records,
        report.images,
        report.duplicates.groups.len()
    );
    Ok(report.write_to_dir(&cfg.out_dir())?)
}

/// Every image file in `dir`, sorted by name, with its stem as id.
fn scan_images(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let known = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|k| k.eq_ignore_ascii_case(e)));
        if known && path.is_file() {
            let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            out.push((id, path));
        }
    }
    out.sort();
    Ok(out)
}

pub fn write_duplicates(groups: &[DuplicateGroup], path: &Path) -> Result<()> {
    let mut text = String::from("group,size,max_distance,label_spread,ids\n");
    for (i, g) in groups.iter().enumerate() {
        let spread = g.label_spread.map(|s| s.to_string()).unwrap_or_default();
        text += &format!("{i},{},{},{spread},{}\n", g.ids.len(), g.max_distance, g.ids.join(";"));
    }
    write_atomic(path, text.as_bytes())
}

/// Groups the images of the train CSV when one is configured, otherwise
/// every image in the image directory.
pub fn cmd_dedup(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dir = require(&cfg.paths.image_dir, "image dir")?;
    let entries: Vec<(String, PathBuf, Option<u8>)> = match &cfg.paths.train_csv {
        Some(csv) => read_records(csv)?
            .into_iter()
            .filter_map(|r| match find_image(dir, &r.id) {
                Some(p) => Some((r.id, p, r.pawpularity)),
                None => {
                    log::warn!("no image for `{}`", r.id);
                    None
                }
            })
            .collect(),
        None => scan_images(dir)?.into_iter().map(|(id, p)| (id, p, None)).collect(),
    };
    if entries.is_empty() {
        bail!("no images found in {}", dir.display());
    }
    let items: Vec<HashedItem> = entries
        .par_iter()
        .map(|(id, path, label)| {
            let img = ImageTensor::load(path)?;
            Ok(HashedItem {
                id: id.clone(),
                hash: PerceptualHash::of(&img, cfg.hash),
                label: *label,
            })
        })
        .collect::<pawfuse::Result<_>>()?;
    let groups = find_duplicates(&items, cfg.threshold)?;
    log::info!("{} images, {} duplicate groups at threshold {}", items.len(), groups.len(), cfg.threshold);
    let path = cfg.out_dir().join(DUPLICATES_FILE);
    write_duplicates(&groups, &path)?;
    Ok(vec![path])
}

pub fn cmd_train(cfg: &RunConfig) -> Result<RunManifest> {
    let start = Instant::now();
    let records = read_records(require(&cfg.paths.train_csv, "train csv")?)?;
    if records.len() < cfg.folds {
        bail!("{} labeled samples cannot fill {} folds", records.len(), cfg.folds);
    }
    let samples = load_samples(records, require(&cfg.paths.image_dir, "image dir")?)?;
    let table = {
        let path = require(&cfg.paths.embeddings, "embeddings")?;
        EmbeddingTable::load(path).with_context(|| format!("reading {}", path.display()))?
    };
    let folds = train_folds(&samples, &table, &CSV_HEADERS, &cfg.settings())?;

    let run_dir = cfg.out_dir();
    let mut checksums = BTreeMap::new();
    let mut put = |rel: String, bytes: Vec<u8>| -> Result<String> {
        write_atomic(&run_dir.join(&rel), &bytes)?;
        checksums.insert(rel.clone(), sha256_hex(&bytes));
        Ok(rel)
    };
    let mut entries = Vec::new();
    for f in &folds {
        let p = &f.predictor;
        let w = f.weights();
        if w.degenerate {
            log::warn!(
                "fold {}: neither model beat the label std ({:.3}); weights fell back to 0.5/0.5, the training-mean predictor is preferable",
                p.fold,
                f.baseline.std
            );
        }
        let report = FusionReport::new(f.scores, &f.baseline, &w);
        entries.push(FoldEntry {
            fold: p.fold,
            seed: p.seed,
            n_train: f.n_train,
            n_val: f.n_val,
            val_meta: f.scores.val_m,
            val_image: f.scores.val_p,
            std: f.baseline.std,
            label_mean: f.baseline.mean,
            w_meta: w.w_meta,
            w_pic: w.w_pic,
            degenerate: w.degenerate,
            meta_checkpoint: put(format!("fold_{}/meta.ckpt", p.fold), p.meta.to_checkpoint().to_bytes())?,
            image_checkpoint: put(format!("fold_{}/image.ckpt", p.fold), p.image.to_checkpoint().to_bytes())?,
            fusion_report: put(format!("fold_{}/fusion.json", p.fold), (report.to_json() + "\n").into_bytes())?,
            meta_seconds: f.meta_time.as_secs_f64(),
            image_seconds: f.image_time.as_secs_f64(),
        });
    }
    let manifest = RunManifest {
        version: MANIFEST_VERSION,
        config: cfg.clone(),
        folds: entries,
        total_seconds: start.elapsed().as_secs_f64(),
        checksums,
    };
    manifest.write(&run_dir)?;
    Ok(manifest)
}

/// Rebuilds the fold predictors recorded in a verified manifest.
pub fn load_predictors(run_dir: &Path, manifest: &RunManifest) -> Result<Vec<FoldPredictor>> {
    manifest
        .folds
        .iter()
        .map(|e| {
            let meta = Checkpoint::load(run_dir.join(&e.meta_checkpoint))?;
            let image = Checkpoint::load(run_dir.join(&e.image_checkpoint))?;
            Ok(FoldPredictor {
                fold: e.fold,
                seed: e.seed,
                meta: MetaNet::from_checkpoint(&meta)?,
                image: ImageModel::from_checkpoint(&image)?,
                weights: FusionWeights {
                    w_meta: e.w_meta,
                    w_pic: e.w_pic,
                    degenerate: e.degenerate,
                },
            })
        })
        .collect()
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let run_dir = cfg.out_dir();
    let manifest = RunManifest::load(&run_dir)?;
    manifest.verify(&run_dir)?;
    let predictors = load_predictors(&run_dir, &manifest)?;

    let test = read_records(require(&cfg.paths.test_csv, "test csv")?)?;
    let dir = match &cfg.paths.test_image_dir {
        Some(d) => d.as_path(),
        None => require(&cfg.paths.image_dir, "image dir")?,
    };
    let images = match load_images(&test, dir) {
        Err(Error::MissingImages(ids)) => bail!("{} test rows have no image: {}", ids.len(), ids.join(", ")),
        other => other?,
    };
    let preds = predict_ensemble(&predictors, &test, &images, cfg.tta)?;
    let rows: Vec<(String, f64)> = test.iter().map(|r| r.id.clone()).zip(preds).collect();
    let mut bytes = Vec::new();
    write_predictions(&rows, &mut bytes)?;
    let path = run_dir.join(PREDICTIONS_FILE);
    write_atomic(&path, &bytes)?;
    Ok(vec![path])
}
