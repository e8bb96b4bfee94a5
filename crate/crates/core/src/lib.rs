//! Pet-photo popularity regression from binary metadata and images.
//!
//! Two models are trained per fold: [`meta::MetaNet`], which embeds the
//! twelve metadata flags and regresses on their low- and high-order
//! interactions, and [`vision::ImageModel`], a backbone plus MLP head
//! trained with binary cross-entropy on labels scaled to `[0, 1]`. Their
//! predictions are blended by [`fusion::fusion_weights`], which gives each
//! model weight in proportion to how far its validation RMSE falls below
//! the label standard deviation.
//!
//! Everything runs on the small reverse-mode engine in [`autodiff`].

pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod fusion;
pub mod meta;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod training;
pub mod vision;

pub use autodiff::{Graph, Matrix, ParamSet};
pub use checkpoint::Checkpoint;
pub use data::{FoldAssignment, MetadataRecord, PerceptualHash};
pub use error::{Error, Result};
pub use fusion::{FusionWeights, StdBaseline, ValidationScores};
pub use rng::SeededRng;
pub use training::{EpochStats, TrainOutcome};
