#![allow(dead_code)]

use std::path::{Path, PathBuf};

use pawfuse::data::{MetadataRecord, CSV_HEADERS, FEATURE_COUNT};
use pawfuse::meta::EmbeddingTable;
use pawfuse::SeededRng;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn embeddings() -> EmbeddingTable {
    EmbeddingTable::load(fixture("embeddings_50d.txt")).expect("embedding fixture")
}

pub fn schema() -> Vec<&'static str> {
    CSV_HEADERS.to_vec()
}

/// `n` records with uniformly random flags and label `100·(f₀ XOR f₁)`.
pub fn xor_records(n: usize, seed: u64) -> Vec<MetadataRecord> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|i| {
            let mut f = [0u8; FEATURE_COUNT];
            for v in f.iter_mut() {
                *v = rng.random_range(0..=1);
            }
            let label = 100 * (f[0] ^ f[1]);
            MetadataRecord::new(format!("x{i}"), f, Some(label))
        })
        .collect()
}
pub mod gradcheck;
pub mod fixtures;
pub mod corpus;
