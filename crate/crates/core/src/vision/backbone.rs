use serde::{Deserialize, Serialize};

use super::image::{ImageTensor, CHANNELS};
use crate::autodiff::{glorot, Graph, Matrix, NodeId, ParamSet};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Feature extractor in front of the image regression head.
///
/// Implementations append nodes to a graph so they can be trained jointly
/// with the head; parameters they bind must be named `backbone.*` and be
/// returned by [`Backbone::init_params`].
pub trait Backbone: Send + Sync {
    fn kind(&self) -> &'static str;

    /// `(height, width)` every input image is resized to.
    fn input_size(&self) -> (usize, usize);

    fn feature_dim(&self) -> usize;

    fn init_params(&self, rng: &mut SeededRng) -> ParamSet;

    /// `B×feature_dim` features for a batch of images at [`Backbone::input_size`].
    fn features(&self, g: &mut Graph, batch: &[&ImageTensor]) -> Result<NodeId>;

    fn config(&self) -> serde_json::Value;

    fn apply(&self, params: &ParamSet, image: &ImageTensor) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let f = self.features(&mut g, &[image])?;
        Ok(g.forward(f, params)?.data().to_vec())
    }
}

/// Small patch-embedding network: non-overlapping square patches are
/// projected to `embed_dim` with a ReLU, then mean-pooled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBackbone {
    pub input: usize,
    pub patch: usize,
    pub embed_dim: usize,
}

impl Default for ReferenceBackbone {
    fn default() -> Self {
        Self {
            input: 32,
            patch: 8,
            embed_dim: 16,
        }
    }
}

impl ReferenceBackbone {
    pub const KIND: &'static str = "reference";

    pub fn new(input: usize, patch: usize, embed_dim: usize) -> Result<Self> {
        if patch == 0 || embed_dim == 0 || !input.is_multiple_of(patch) {
            return Err(Error::contract(format!(
                "input {input} must be a positive multiple of patch {patch}"
            )));
        }
        Ok(Self {
            input,
            patch,
            embed_dim,
        })
    }

    fn patches_per_side(&self) -> usize {
        self.input / self.patch
    }

    fn patch_len(&self) -> usize {
        self.patch * self.patch * CHANNELS
    }

    /// `(B·P)×(patch²·3)`: one row per patch, pixels row-major HWC.
    fn patch_matrix(&self, batch: &[&ImageTensor]) -> Result<Matrix> {
        let side = self.patches_per_side();
        let mut data = Vec::with_capacity(batch.len() * side * side * self.patch_len());
        for img in batch {
            if (img.height(), img.width()) != (self.input, self.input) {
                return Err(Error::dim(
                    "patch_embed",
                    format!("image {}x{}, expected {}x{}", img.height(), img.width(), self.input, self.input),
                ));
            }
            for py in 0..side {
                for px in 0..side {
                    for y in py * self.patch..(py + 1) * self.patch {
                        for x in px * self.patch..(px + 1) * self.patch {
                            data.extend(img.pixel(y, x));
                        }
                    }
                }
            }
        }
        Matrix::new(batch.len() * side * side, self.patch_len(), data)
    }
}

impl Backbone for ReferenceBackbone {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn input_size(&self) -> (usize, usize) {
        (self.input, self.input)
    }

    fn feature_dim(&self) -> usize {
        self.embed_dim
    }

    fn init_params(&self, rng: &mut SeededRng) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.insert("backbone.patch.w", glorot(self.patch_len(), self.embed_dim, rng));
        ps.insert("backbone.patch.b", Matrix::zeros(1, self.embed_dim));
        ps
    }

    fn features(&self, g: &mut Graph, batch: &[&ImageTensor]) -> Result<NodeId> {
        let per_image = self.patches_per_side().pow(2);
        let patches = g.constant(self.patch_matrix(batch)?);
        let embedded = g.dense(patches, "backbone.patch.w", "backbone.patch.b");
        let embedded = g.relu(embedded);
        let mut pool = Matrix::zeros(batch.len(), batch.len() * per_image);
        for b in 0..batch.len() {
            for p in 0..per_image {
                pool.set(b, b * per_image + p, 1.0 / per_image as f64);
            }
        }
        let pool = g.constant(pool);
        Ok(g.matmul(pool, embedded))
    }

    fn config(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain struct")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_dividing_patch() {
        assert!(ReferenceBackbone::new(30, 8, 16).is_err());
        assert!(ReferenceBackbone::new(32, 8, 16).is_ok());
    }

    #[test]
    fn output_length_is_feature_dim() {
        let bb = ReferenceBackbone::default();
        let params = bb.init_params(&mut SeededRng::new(0));
        let img = ImageTensor::filled(32, 32, [0.2, 0.4, 0.6]);
        assert_eq!(bb.apply(&params, &img).unwrap().len(), 16);
    }

    #[test]
    fn wrong_input_size_is_a_dimension_error() {
        let bb = ReferenceBackbone::default();
        let params = bb.init_params(&mut SeededRng::new(0));
        let img = ImageTensor::filled(16, 16, [0.5; 3]);
        assert!(matches!(bb.apply(&params, &img), Err(Error::Dimension { .. })));
    }

    #[test]
    fn uniform_image_pools_to_single_patch_embedding() {
        let bb = ReferenceBackbone::new(8, 4, 3).unwrap();
        let params = bb.init_params(&mut SeededRng::new(1));
        let img = ImageTensor::filled(8, 8, [0.3, 0.1, 0.9]);
        let f = bb.apply(&params, &img).unwrap();
        let row = Matrix::row_vector(std::iter::repeat_n([0.3, 0.1, 0.9], 16).flatten().collect()).unwrap();
        let w = params.get("backbone.patch.w").unwrap();
        let direct: Vec<f64> = row.matmul(w).unwrap().data().iter().map(|v| v.max(0.0)).collect();
        for (a, b) in f.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
