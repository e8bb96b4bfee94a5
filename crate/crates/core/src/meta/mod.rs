//! Metadata regression with explicit pairwise feature interactions.

mod embedding;
mod net;

pub use embedding::EmbeddingTable;
pub use net::{
    embed_features, embed_record, interact, reduce_and_normalize, train_meta, train_meta_features, InteractionMatrix,
    LowOrderFeatures, MetaGraph, MetaNet, MetaNetConfig, CHECKPOINT_KIND,
};
