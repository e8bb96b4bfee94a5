//! Validation-gated blending of the metadata and image models.
//!
//! Each model earns `relu(std - val_rmse)`, where `std` is the sample
//! standard deviation of the training labels: the RMSE of always
//! predicting the training mean. A model that does no better than that
//! gets weight zero. Weights are the normalized scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Validation RMSEs of both models on the 0–100 label scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationScores {
    pub val_m: f64,
    pub val_p: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StdBaseline {
    pub std: f64,
    pub mean: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub w_meta: f64,
    pub w_pic: f64,
    /// Neither model beat the baseline; weights fell back to (0.5, 0.5).
    pub degenerate: bool,
}

impl FusionWeights {
    pub const FALLBACK: FusionWeights = FusionWeights {
        w_meta: 0.5,
        w_pic: 0.5,
        degenerate: true,
    };
}

/// Bessel-corrected (N−1) standard deviation and mean of training labels.
pub fn std_baseline(labels: &[f64]) -> Result<StdBaseline> {
    let n = labels.len();
    if n < 2 {
        return Err(Error::contract(format!("std baseline needs n >= 2, got {n}")));
    }
    let mean = labels.iter().sum::<f64>() / n as f64;
    let ss: f64 = labels.iter().map(|l| (l - mean) * (l - mean)).sum();
    Ok(StdBaseline {
        std: (ss / (n - 1) as f64).sqrt(),
        mean,
        n,
    })
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn fusion_weights(scores: ValidationScores, baseline: &StdBaseline) -> FusionWeights {
    let a_m = relu(baseline.std - scores.val_m);
    let a_p = relu(baseline.std - scores.val_p);
    let total = a_m + a_p;
    if total > 0.0 {
        FusionWeights {
            w_meta: a_m / total,
            w_pic: a_p / total,
            degenerate: false,
        }
    } else {
        FusionWeights::FALLBACK
    }
}

/// Convex combination of the two model predictions.
pub fn fuse_predict(weights: &FusionWeights, pred_m: f64, pred_p: f64) -> f64 {
    weights.w_meta * pred_m + weights.w_pic * pred_p
}

/// Everything needed to audit one fusion decision; serialized as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub val_m: f64,
    pub val_p: f64,
    pub std: f64,
    pub w_meta: f64,
    pub w_pic: f64,
    pub degenerate: bool,
}

impl FusionReport {
    pub fn new(scores: ValidationScores, baseline: &StdBaseline, weights: &FusionWeights) -> Self {
        Self {
            val_m: scores.val_m,
            val_p: scores.val_p,
            std: baseline.std,
            w_meta: weights.w_meta,
            w_pic: weights.w_pic,
            degenerate: weights.degenerate,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }
}
