//! Results shared by both training loops.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// Training RMSE on the 0–100 scale, measured after the epoch.
    pub train_rmse: f64,
    pub val_rmse: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<M> {
    /// Parameters from the epoch with the lowest validation RMSE.
    pub model: M,
    /// Best validation RMSE on the 0–100 scale.
    pub val_rmse: f64,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
}

impl<M> TrainOutcome<M> {
    pub fn min_train_rmse(&self) -> f64 {
        self.history.iter().map(|e| e.train_rmse).fold(f64::INFINITY, f64::min)
    }
}

