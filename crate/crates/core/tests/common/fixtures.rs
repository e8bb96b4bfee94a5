//! Synthetic corpora where exactly one modality carries the label.

use pawfuse::data::{MetadataRecord, FEATURE_COUNT};
use pawfuse::pipeline::{Sample, TrainSettings};
use pawfuse::vision::{Augmentation, AugmentationSpec, ImageHeadConfig, ImageTensor};
use pawfuse::SeededRng;
use rand::Rng;

pub fn random_flags(rng: &mut SeededRng) -> [u8; FEATURE_COUNT] {
    let mut f = [0u8; FEATURE_COUNT];
    for v in f.iter_mut() {
        *v = rng.random_range(0..=1);
    }
    f
}

pub fn noise_image(rng: &mut SeededRng, size: usize) -> ImageTensor {
    let data = (0..size * size * 3).map(|_| rng.random_range(0.0..=1.0)).collect();
    ImageTensor::new(size, size, data).unwrap()
}

/// Gray image at `level` with a random tint and ±0.04 pixel noise.
pub fn brightness_image(rng: &mut SeededRng, size: usize, level: f64) -> ImageTensor {
    let tint: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.03..0.03));
    let data = (0..size * size)
        .flat_map(|_| {
            let n = rng.random_range(-0.04..0.04);
            tint.map(|t| (level + t + n).clamp(0.0, 1.0))
        })
        .collect();
    ImageTensor::new(size, size, data).unwrap()
}

/// Label `10 + 50·Focus + 30·Eyes`; images are uniform noise.
pub fn metadata_determined(n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|i| {
            let f = random_flags(&mut rng);
            let label = 10 + 50 * f[0] + 30 * f[1];
            Sample {
                record: MetadataRecord::new(format!("m{i:03}"), f, Some(label)),
                image: noise_image(&mut rng, 32),
            }
        })
        .collect()
}

/// Label drawn from 10..=90; image brightness equals label / 100 and the
/// metadata flags are random.
pub fn image_determined(n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|i| {
            let label: u8 = rng.random_range(10..=90);
            let f = random_flags(&mut rng);
            Sample {
                record: MetadataRecord::new(format!("p{i:03}"), f, Some(label)),
                image: brightness_image(&mut rng, 32, f64::from(label) / 100.0),
            }
        })
        .collect()
}

/// Geometric-only augmentation: photometric ops would blur the brightness signal.
pub fn geometric_augmentation() -> AugmentationSpec {
    AugmentationSpec {
        ops: vec![Augmentation::Rotate { max_degrees: 10.0 }, Augmentation::FlipHorizontal { p: 0.5 }],
        seed: 0,
    }
}

pub fn gating_settings(seed: u64) -> TrainSettings {
    let mut s = TrainSettings {
        folds: 4,
        seed,
        ..Default::default()
    };
    s.image = ImageHeadConfig {
        learning_rate: 1e-2,
        epochs: 40,
        augmentation: geometric_augmentation(),
        ..Default::default()
    };
    s
}
