//! Block-pattern images with planted duplicates, an independent reference
//! hasher and a brute-force grouping oracle.

use std::collections::VecDeque;

use pawfuse::data::{hamming, HashAlgorithm, HashedItem, PerceptualHash};
use pawfuse::vision::ImageTensor;
use pawfuse::SeededRng;
use rand::Rng;

/// 8×8 grid of gray levels kept away from the middle, so flipping one block
/// moves the mean by under 0.01 and no other block crosses it.
pub fn random_blocks(rng: &mut SeededRng) -> Vec<f64> {
    (0..64)
        .map(|_| {
            if rng.random_bool(0.5) {
                rng.random_range(0.1..0.35)
            } else {
                rng.random_range(0.65..0.9)
            }
        })
        .collect()
}

pub fn render(blocks: &[f64], block_px: usize) -> ImageTensor {
    let side = 8 * block_px;
    ImageTensor::from_fn(side, side, |y, x| [blocks[(y / block_px) * 8 + x / block_px]; 3])
}

/// Copy of `blocks` with `flips` distinct blocks mirrored across 0.5.
pub fn perturb(blocks: &[f64], flips: usize, rng: &mut SeededRng) -> Vec<f64> {
    let mut out = blocks.to_vec();
    let mut idx: Vec<usize> = (0..64).collect();
    for i in 0..flips {
        let j = rng.random_range(i..64);
        idx.swap(i, j);
        out[idx[i]] = 1.0 - out[idx[i]];
    }
    out
}

pub struct Corpus {
    pub images: Vec<ImageTensor>,
    pub labels: Vec<u8>,
    /// `(original, copy)` index pairs planted as byte-identical duplicates.
    pub exact_pairs: Vec<(usize, usize)>,
    /// `(original, variant, flipped blocks)` planted near-duplicates.
    pub near_pairs: Vec<(usize, usize, usize)>,
}

impl Corpus {
    pub fn ids(&self) -> Vec<String> {
        (0..self.images.len()).map(|i| format!("img{i:03}")).collect()
    }

    pub fn hashed(&self, algorithm: HashAlgorithm) -> Vec<HashedItem> {
        self.ids()
            .into_iter()
            .zip(&self.images)
            .zip(&self.labels)
            .map(|((id, img), &label)| HashedItem {
                id,
                hash: PerceptualHash::of(img, algorithm),
                label: Some(label),
            })
            .collect()
    }
}

/// `bases` distinct images followed by `exact` identical copies and `near`
/// perturbed copies (1..=max_flips blocks) of randomly chosen bases.
pub fn planted_corpus(bases: usize, exact: usize, near: usize, max_flips: usize, seed: u64) -> Corpus {
    let mut rng = SeededRng::new(seed);
    let mut grids: Vec<Vec<f64>> = (0..bases).map(|_| random_blocks(&mut rng)).collect();
    let mut exact_pairs = Vec::new();
    let mut near_pairs = Vec::new();
    assert!(exact + near <= bases, "each planted copy needs its own base");
    // Partial Fisher–Yates: distinct random sources for the planted copies.
    let mut sources: Vec<usize> = (0..bases).collect();
    for i in 0..exact + near {
        let pick = rng.random_range(i..bases);
        sources.swap(i, pick);
        let src = sources[i];
        let new = grids.len();
        if i < exact {
            grids.push(grids[src].clone());
            exact_pairs.push((src, new));
        } else {
            let flips = rng.random_range(1..=max_flips);
            grids.push(perturb(&grids[src], flips, &mut rng));
            near_pairs.push((src, new, flips));
        }
    }
    let labels = (0..grids.len()).map(|_| rng.random_range(0..=100)).collect();
    Corpus {
        images: grids.iter().map(|g| render(g, 4)).collect(),
        labels,
        exact_pairs,
        near_pairs,
    }
}

/// Connected components of size ≥ 2 of the ≤-threshold graph, found by
/// breadth-first search over all O(n²) pairs; members ascending, groups
/// ordered by smallest member.
pub fn brute_force_groups(bits: &[u64], threshold: u32) -> Vec<Vec<usize>> {
    let n = bits.len();
    let mut seen = vec![false; n];
    let mut groups = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if !seen[v] && hamming(bits[u], bits[v]) <= threshold {
                    seen[v] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        if comp.len() >= 2 {
            comp.sort_unstable();
            groups.push(comp);
        }
    }
    groups
}

/// Straightforward hasher: each source pixel is split into an
/// `out_h × out_w` grid of equal sub-cells, so every thumbnail cell is the
/// plain mean of an `h × w` block of sub-cells.
pub fn reference_hash(image: &ImageTensor, algorithm: HashAlgorithm) -> u64 {
    let (h, w) = (image.height(), image.width());
    let (out_h, out_w) = match algorithm {
        HashAlgorithm::Average => (8, 8),
        HashAlgorithm::Difference => (8, 9),
    };
    let luma = |y: usize, x: usize| {
        let p = image.pixel(y, x);
        0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
    };
    let mut cells = vec![0.0; out_h * out_w];
    for (c, cell) in cells.iter_mut().enumerate() {
        let (oy, ox) = (c / out_w, c % out_w);
        let mut acc = 0.0;
        // Sub-cell (sy, sx) of the (h·out_h)×(w·out_w) grid maps to source
        // pixel (sy / out_h, sx / out_w).
        for sy in oy * h..(oy + 1) * h {
            for sx in ox * w..(ox + 1) * w {
                acc += luma(sy / out_h, sx / out_w);
            }
        }
        *cell = acc / (h * w) as f64;
    }
    let bits: Vec<bool> = match algorithm {
        HashAlgorithm::Average => {
            let mean = cells.iter().sum::<f64>() / 64.0;
            cells.iter().map(|&v| v - mean > 1e-9).collect()
        }
        HashAlgorithm::Difference => cells
            .chunks(9)
            .flat_map(|r| (0..8).map(move |x| r[x + 1] - r[x] > 1e-9))
            .collect(),
    };
    bits.iter().fold(0, |acc, &b| (acc << 1) | u64::from(b))
}
