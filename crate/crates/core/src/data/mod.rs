//! Ingestion, perceptual-hash deduplication, dataset statistics and KFold splits.

mod dedup;
mod eda;
mod kfold;
mod phash;
mod records;

pub use dedup::{find_duplicates, DuplicateGroup, HashedItem};
pub use eda::{
    correlation_vector, eda_report, DuplicateSummary, EdaReport, FeatureCorrelation, Histogram, ImageInfo,
    SpeciesStats, RATIO_BIN, SIZE_BIN,
};
pub use kfold::{kfold_split, FoldAssignment};
pub use phash::{hamming, perceptual_hash, HashAlgorithm, PerceptualHash};
pub use records::{
    feature_index, parse_annotations, parse_csv, parse_csv_reader, write_csv, write_predictions, Annotation,
    MetadataRecord, Species, CSV_HEADERS, FEATURE_COUNT, FEATURE_NAMES,
};
