//! Training-time and test-time image augmentation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::image::ImageTensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Augmentation {
    FlipHorizontal { p: f64 },
    /// Rotation by an angle drawn from `±max_degrees`; exposed corners
    /// replicate the nearest edge pixel.
    Rotate { max_degrees: f64 },
    /// Additive shift drawn from `±max_delta`.
    Brightness { max_delta: f64 },
    /// Scales deviations from the image mean by a factor drawn from
    /// `[max(0, 1 − strength), 1 + strength]`.
    Contrast { strength: f64 },
    /// Scales deviations from each pixel's luma, same factor range as contrast.
    Saturation { strength: f64 },
    /// With probability `p`, zeroes one axis-aligned rectangle covering an
    /// area fraction drawn from `[area_min, area_max]`.
    RandomErase { p: f64, area_min: f64, area_max: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub ops: Vec<Augmentation>,
    pub seed: u64,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        Self {
            ops: vec![
                Augmentation::RandomErase { p: 0.25, area_min: 0.02, area_max: 0.15 },
                Augmentation::Rotate { max_degrees: 10.0 },
                Augmentation::Brightness { max_delta: 0.1 },
                Augmentation::FlipHorizontal { p: 0.5 },
                Augmentation::Contrast { strength: 0.1 },
                Augmentation::Saturation { strength: 0.1 },
            ],
            seed: 0,
        }
    }
}

impl AugmentationSpec {
    pub fn none() -> Self {
        Self { ops: vec![], seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        for op in &self.ops {
            let ok = match *op {
                Augmentation::FlipHorizontal { p } => prob(p),
                Augmentation::Rotate { max_degrees } => max_degrees >= 0.0,
                Augmentation::Brightness { max_delta } => max_delta >= 0.0,
                Augmentation::Contrast { strength } | Augmentation::Saturation { strength } => strength >= 0.0,
                Augmentation::RandomErase { p, area_min, area_max } => {
                    prob(p) && area_min > 0.0 && area_min <= area_max && area_max <= 1.0
                }
            };
            if !ok {
                return Err(Error::contract(format!("invalid augmentation {op:?}")));
            }
        }
        Ok(())
    }
}

fn jitter_factor(strength: f64, rng: &mut impl Rng) -> f64 {
    if strength == 0.0 {
        return 1.0;
    }
    rng.random_range((1.0 - strength).max(0.0)..=1.0 + strength)
}

/// Applies every op of `spec` in order. Shape is preserved and values stay
/// in `[0, 1]`; the result depends only on the input and the rng state.
pub fn augment(image: &ImageTensor, spec: &AugmentationSpec, rng: &mut impl Rng) -> ImageTensor {
    let mut img = image.clone();
    for op in &spec.ops {
        img = match *op {
            Augmentation::FlipHorizontal { p } => {
                if rng.random_bool(p) {
                    img.flip_horizontal()
                } else {
                    img
                }
            }
            Augmentation::Rotate { max_degrees } => {
                if max_degrees == 0.0 {
                    continue;
                }
                let deg = rng.random_range(-max_degrees..=max_degrees);
                rotate(&img, deg)
            }
            Augmentation::Brightness { max_delta } => {
                if max_delta == 0.0 {
                    continue;
                }
                let delta = rng.random_range(-max_delta..=max_delta);
                img.map_pixels(|p| p.map(|v| v + delta));
                img
            }
            Augmentation::Contrast { strength } => {
                let f = jitter_factor(strength, rng);
                let mean = img.grayscale().iter().sum::<f64>() / (img.height() * img.width()) as f64;
                img.map_pixels(|p| p.map(|v| mean + f * (v - mean)));
                img
            }
            Augmentation::Saturation { strength } => {
                let f = jitter_factor(strength, rng);
                img.map_pixels(|p| {
                    let gray = p[0] * 0.299 + p[1] * 0.587 + p[2] * 0.114;
                    p.map(|v| gray + f * (v - gray))
                });
                img
            }
            Augmentation::RandomErase { p, area_min, area_max } => {
                if rng.random_bool(p) {
                    random_erase(&img, area_min, area_max, rng)
                } else {
                    img
                }
            }
        };
    }
    img
}

pub fn rotate(image: &ImageTensor, degrees: f64) -> ImageTensor {
    if degrees == 0.0 {
        return image.clone();
    }
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cy = (image.height() as f64 - 1.0) / 2.0;
    let cx = (image.width() as f64 - 1.0) / 2.0;
    ImageTensor::from_fn(image.height(), image.width(), |y, x| {
        // Inverse mapping: rotate the destination coordinate back.
        let (dy, dx) = (y as f64 - cy, x as f64 - cx);
        let sy = cy + cos * dy - sin * dx;
        let sx = cx + sin * dy + cos * dx;
        image.sample_bilinear(sy, sx)
    })
}

/// Zeroes one rectangle whose area fraction lies in `[area_min, area_max]`
/// (up to rounding to whole pixels).
pub fn random_erase(image: &ImageTensor, area_min: f64, area_max: f64, rng: &mut impl Rng) -> ImageTensor {
    let (h, w) = (image.height(), image.width());
    let total = (h * w) as f64;
    let mut out = image.clone();
    let mut dims = None;
    for _ in 0..10 {
        let area = rng.random_range(area_min..=area_max) * total;
        let log_ratio = rng.random_range((0.3f64).ln()..=(1.0f64 / 0.3).ln());
        let ratio = log_ratio.exp();
        let eh = (area * ratio).sqrt().round() as usize;
        let ew = (area / ratio).sqrt().round() as usize;
        if (1..=h).contains(&eh) && (1..=w).contains(&ew) {
            dims = Some((eh, ew));
            break;
        }
    }
    let (eh, ew) = dims.unwrap_or_else(|| {
        let side = ((area_min * total).sqrt().round() as usize).clamp(1, h.min(w));
        (side, side)
    });
    let y0 = rng.random_range(0..=h - eh);
    let x0 = rng.random_range(0..=w - ew);
    for y in y0..y0 + eh {
        for x in x0..x0 + ew {
            out.set_pixel(y, x, [0.0; 3]);
        }
    }
    out
}
