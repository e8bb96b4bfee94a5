//! Image regression: backbone features → MLP → sigmoid, trained with
//! binary cross-entropy against labels scaled to `[0, 1]`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::augment::{augment, AugmentationSpec};
use super::backbone::{Backbone, ReferenceBackbone};
use super::image::ImageTensor;
use crate::autodiff::{init_mlp, Adam, Graph, Matrix, NodeId, ParamSet};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::metrics::rmse;
use crate::rng::SeededRng;
use crate::training::{EpochStats, TrainOutcome};

pub const CHECKPOINT_KIND: &str = "image-head";

/// Predictions are clamped to `[BCE_EPSILON, 1 − BCE_EPSILON]` by [`bce_loss`].
pub const BCE_EPSILON: f64 = 1e-7;

pub fn normalize_label(pawpularity: i64) -> Result<f64> {
    if !(0..=100).contains(&pawpularity) {
        return Err(Error::contract(format!("pawpularity {pawpularity} outside 0..=100")));
    }
    Ok(pawpularity as f64 / 100.0)
}

/// Mean of `−[y·ln ŷ + (1−y)·ln(1−ŷ)]`; soft targets are allowed.
pub fn bce_loss(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::contract(format!(
            "bce needs equal non-zero lengths, got {} and {}",
            preds.len(),
            targets.len()
        )));
    }
    let total: f64 = preds
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / preds.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImageHeadConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub augmentation: AugmentationSpec,
    pub tta_views: usize,
}

impl Default for ImageHeadConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            learning_rate: 2e-5,
            epochs: 10,
            batch_size: 40,
            seed: 0,
            augmentation: AugmentationSpec::default(),
            tta_views: 4,
        }
    }
}

impl ImageHeadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) || self.batch_size == 0 || self.epochs == 0 || self.tta_views == 0 {
            return Err(Error::contract("image head widths, epochs, batch size and TTA views must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::contract("learning rate must be positive"));
        }
        self.augmentation.validate()
    }
}

#[derive(Clone, Debug)]
pub struct ImageSample {
    pub id: String,
    pub image: ImageTensor,
    pub label: Option<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageModel<B> {
    pub backbone: B,
    pub config: ImageHeadConfig,
    pub params: ParamSet,
}

impl<B: Backbone> ImageModel<B> {
    pub fn new(backbone: B, config: ImageHeadConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = SeededRng::new(config.seed);
        let mut params = backbone.init_params(&mut rng);
        let mut widths = vec![backbone.feature_dim()];
        widths.extend(&config.hidden);
        widths.push(1);
        params.extend(init_mlp("head", &widths, &mut rng));
        Ok(Self {
            backbone,
            config,
            params,
        })
    }

    /// Resizes to the backbone input size.
    pub fn prepare(&self, image: &ImageTensor) -> ImageTensor {
        let (h, w) = self.backbone.input_size();
        image.resize_bilinear(h, w)
    }

    /// `B×1` logits for images already at the backbone input size.
    pub fn build(&self, batch: &[&ImageTensor]) -> Result<(Graph, NodeId)> {
        if batch.is_empty() {
            return Err(Error::contract("empty batch"));
        }
        let mut g = Graph::new();
        let mut x = self.backbone.features(&mut g, batch)?;
        let layers = self.config.hidden.len() + 1;
        for i in 0..layers {
            x = g.dense(x, &format!("head.w{i}"), &format!("head.b{i}"));
            if i + 1 < layers {
                x = g.relu(x);
            }
        }
        Ok((g, x))
    }

    /// BCE of `sigmoid(logits)` against targets in `[0, 1]`.
    pub fn loss_graph(&self, batch: &[&ImageTensor], targets: &[f64]) -> Result<(Graph, NodeId)> {
        if targets.len() != batch.len() {
            return Err(Error::contract("one target per image required"));
        }
        let (mut g, logits) = self.build(batch)?;
        let y = g.constant(Matrix::column_vector(targets.to_vec())?);
        let loss = g.bce_with_logits(logits, y);
        Ok((g, loss))
    }

    /// Predictions in `[0, 1]` for images at the backbone input size.
    pub fn predict_prepared(&self, images: &[&ImageTensor]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(64) {
            let (mut g, logits) = self.build(chunk)?;
            let p = g.sigmoid(logits);
            out.extend_from_slice(g.forward(p, &self.params)?.data());
        }
        Ok(out)
    }

    pub fn predict(&self, image: &ImageTensor) -> Result<f64> {
        Ok(self.predict_prepared(&[&self.prepare(image)])?[0])
    }

    /// Mean prediction over `n_views` views: the plain image followed by
    /// `n_views − 1` augmented copies drawn from `rng`.
    pub fn tta_predict(
        &self,
        image: &ImageTensor,
        spec: &AugmentationSpec,
        n_views: usize,
        rng: &mut SeededRng,
    ) -> Result<f64> {
        if n_views == 0 {
            return Err(Error::contract("TTA needs at least one view"));
        }
        let base = self.prepare(image);
        let mut views = vec![base.clone()];
        views.extend((1..n_views).map(|_| augment(&base, spec, rng)));
        let refs: Vec<&ImageTensor> = views.iter().collect();
        let preds = self.predict_prepared(&refs)?;
        Ok(preds.iter().sum::<f64>() / n_views as f64)
    }
}

impl ImageModel<ReferenceBackbone> {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            config: serde_json::json!({
                "backbone": { "kind": self.backbone.kind(), "config": self.backbone.config() },
                "head": self.config,
            }),
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != CHECKPOINT_KIND {
            return Err(Error::Checkpoint(format!("expected {CHECKPOINT_KIND}, found {}", ck.kind)));
        }
        let kind = ck.config["backbone"]["kind"].as_str().unwrap_or_default();
        if kind != ReferenceBackbone::KIND {
            return Err(Error::Checkpoint(format!("unsupported backbone `{kind}`")));
        }
        let backbone: ReferenceBackbone = serde_json::from_value(ck.config["backbone"]["config"].clone())?;
        let config: ImageHeadConfig = serde_json::from_value(ck.config["head"].clone())?;
        let fresh = ImageModel::new(backbone, config)?;
        let params = ck.params.clone().conform_to(&fresh.params)?;
        Ok(Self { params, ..fresh })
    }
}

fn labels(samples: &[ImageSample]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            s.label
                .map(f64::from)
                .ok_or_else(|| Error::contract(format!("image `{}` has no label", s.id)))
        })
        .collect()
}

/// Adam on BCE of normalized labels with per-sample augmentation; RMSE on
/// the 0–100 scale selects the best epoch.
pub fn train_image<B: Backbone>(
    train: &[ImageSample],
    val: &[ImageSample],
    backbone: B,
    config: &ImageHeadConfig,
) -> Result<TrainOutcome<ImageModel<B>>> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::contract("training and validation sets must be non-empty"));
    }
    let train_y = labels(train)?;
    let val_y = labels(val)?;
    let mut model = ImageModel::new(backbone, config.clone())?;
    let train_imgs: Vec<ImageTensor> = train.iter().map(|s| model.prepare(&s.image)).collect();
    let val_imgs: Vec<ImageTensor> = val.iter().map(|s| model.prepare(&s.image)).collect();
    let targets: Vec<f64> = train_y.iter().map(|y| y / 100.0).collect();

    let root = SeededRng::new(config.seed);
    let mut shuffle_rng = root.derive(1);
    let aug_root = SeededRng::new(config.augmentation.seed ^ config.seed).derive(2);
    let mut opt = Adam::new(config.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let train_refs: Vec<&ImageTensor> = train_imgs.iter().collect();
    let val_refs: Vec<&ImageTensor> = val_imgs.iter().collect();

    let mut best = (f64::INFINITY, 0, model.params.clone());
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            let views: Vec<ImageTensor> = chunk
                .iter()
                .map(|&i| {
                    let mut rng = aug_root.derive((epoch * train.len() + i) as u64);
                    augment(&train_imgs[i], &config.augmentation, &mut rng)
                })
                .collect();
            let refs: Vec<&ImageTensor> = views.iter().collect();
            let yb: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
            let (mut g, loss) = model.loss_graph(&refs, &yb)?;
            g.forward(loss, &model.params)?;
            let grads = g.backward(loss)?;
            opt.step(&mut model.params, &grads);
        }
        if !model.params.is_finite() {
            return Err(Error::contract(format!("image head diverged at epoch {epoch}")));
        }
        let scaled = |p: Vec<f64>| p.into_iter().map(|v| v * 100.0).collect::<Vec<_>>();
        let train_rmse = rmse(&scaled(model.predict_prepared(&train_refs)?), &train_y)?;
        let val_rmse = rmse(&scaled(model.predict_prepared(&val_refs)?), &val_y)?;
        history.push(EpochStats { train_rmse, val_rmse });
        if val_rmse < best.0 {
            best = (val_rmse, epoch, model.params.clone());
        }
    }
    let (val_rmse, best_epoch, params) = best;
    model.params = params;
    Ok(TrainOutcome {
        model,
        val_rmse,
        best_epoch,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_normalization() {
        assert_eq!(normalize_label(100).unwrap(), 1.0);
        assert_eq!(normalize_label(0).unwrap(), 0.0);
        assert_eq!(normalize_label(38).unwrap(), 0.38);
        assert!(normalize_label(101).is_err());
        assert!(normalize_label(-1).is_err());
    }

    #[test]
    fn label_round_trip_all_values() {
        for v in 0..=100 {
            let y = normalize_label(v).unwrap();
            assert!((0.0..=1.0).contains(&y));
            assert!((y * 100.0 - v as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn bce_hand_values() {
        assert!(bce_loss(&[1.0 - BCE_EPSILON], &[1.0]).unwrap() < 1e-6);
        assert!((bce_loss(&[0.5], &[0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce_loss(&[0.9], &[1.0]).unwrap() + 0.9f64.ln()).abs() < 1e-12);
        assert!(bce_loss(&[], &[]).is_err());
    }

    #[test]
    fn bce_is_finite_at_extremes() {
        assert!(bce_loss(&[0.0, 1.0], &[1.0, 0.0]).unwrap().is_finite());
    }

    #[test]
    fn bce_minimized_at_target() {
        for &y in &[0.0, 0.13, 0.38, 0.5, 0.77, 1.0] {
            let best = (1..1000)
                .map(|i| i as f64 / 1000.0)
                .min_by(|a, b| {
                    bce_loss(&[*a], &[y]).unwrap().total_cmp(&bce_loss(&[*b], &[y]).unwrap())
                })
                .unwrap();
            let expect = f64::clamp(y, 0.001, 0.999);
            assert!((best - expect).abs() <= 1e-3 + 1e-12, "y={y} argmin={best}");
        }
    }

    #[test]
    fn zero_head_predicts_half() {
        let mut m = ImageModel::new(ReferenceBackbone::default(), ImageHeadConfig::default()).unwrap();
        for (name, p) in m.params.iter_mut() {
            if name.starts_with("head.") {
                p.data_mut().fill(0.0);
            }
        }
        let img = ImageTensor::filled(48, 40, [0.1, 0.7, 0.3]);
        assert_eq!(m.predict(&img).unwrap(), 0.5);
    }

    #[test]
    fn single_view_tta_is_plain_prediction() {
        let m = ImageModel::new(ReferenceBackbone::default(), ImageHeadConfig::default()).unwrap();
        let img = ImageTensor::from_fn(32, 32, |y, x| [y as f64 / 31.0, x as f64 / 31.0, 0.5]);
        let spec = AugmentationSpec::default();
        let tta = m.tta_predict(&img, &spec, 1, &mut SeededRng::new(3)).unwrap();
        assert_eq!(tta, m.predict(&img).unwrap());
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = ImageModel::new(ReferenceBackbone::default(), ImageHeadConfig::default()).unwrap();
        let bytes = m.to_checkpoint().to_bytes();
        let back = ImageModel::from_checkpoint(&Checkpoint::read_from(&bytes[..]).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
