//! 64-bit perceptual image hashes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::vision::{resize_area, ImageTensor};

/// Comparisons ignore differences below this, far finer than one 8-bit
/// level, so area-averaging rounding on flat regions cannot flip bits.
const TIE_EPSILON: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashAlgorithm {
    /// 8×8 grayscale thumbnail thresholded at its mean.
    #[default]
    Average,
    /// 9×8 thumbnail; each bit says whether brightness rises to the right.
    Difference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PerceptualHash {
    pub bits: u64,
    pub algorithm: HashAlgorithm,
}

impl PerceptualHash {
    pub fn of(image: &ImageTensor, algorithm: HashAlgorithm) -> Self {
        let gray = image.grayscale();
        let (h, w) = (image.height(), image.width());
        let cells = match algorithm {
            HashAlgorithm::Average => {
                let small = resize_area(&gray, h, w, 8, 8);
                let mean = small.iter().sum::<f64>() / 64.0;
                small.iter().map(|&v| v > mean + TIE_EPSILON).collect::<Vec<_>>()
            }
            HashAlgorithm::Difference => {
                let small = resize_area(&gray, h, w, 8, 9);
                small
                    .chunks_exact(9)
                    .flat_map(|row| row.windows(2).map(|p| p[0] + TIE_EPSILON < p[1]))
                    .collect()
            }
        };
        // First cell lands in the most significant bit.
        let bits = cells.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b));
        Self { bits, algorithm }
    }

    /// Hamming distance. Hashes of different algorithms are not comparable;
    /// only the bits are compared.
    pub fn distance(&self, other: &PerceptualHash) -> u32 {
        hamming(self.bits, other.bits)
    }
}

impl fmt::Display for PerceptualHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.bits)
    }
}

pub fn perceptual_hash(image: &ImageTensor, algorithm: HashAlgorithm) -> PerceptualHash {
    PerceptualHash::of(image, algorithm)
}

pub fn hamming(a: u64, b: u64) -> u32 {
    (a ^ b).count_ones()
}
