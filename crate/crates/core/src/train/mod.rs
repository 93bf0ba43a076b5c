//! Training loop, augmentation, sliding-window inference and evaluation.

mod augment;
mod infer;
mod loss;
mod metrics;
mod optim;
mod schedule;
mod trainer;

pub use augment::{augment, CropFlip};
pub use infer::{
    argmax_labels, images_to_tensor, sliding_infer, sliding_logits, LogitModel, PIXEL_MEAN, PIXEL_STD,
};
pub use loss::weighted_cross_entropy;
pub use metrics::ConfusionMatrix;
pub use optim::AdamW;
pub use schedule::{poly_lr, DEFAULT_POLY_POWER};
pub use trainer::{evaluate, evaluate_tiles, format_log, train, train_on_tiles, LossRecord, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::classes::NODATA;
use crate::raster::RasterError;
use crate::swin::ModelError;
use crate::tiler::{TileError, WeightVector};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("shape: {0}")]
    Shape(String),
    #[error("every pixel is ignored, the loss is undefined")]
    AllIgnored,
    #[error("crop {crop} does not fit a {width}x{height} tile")]
    Crop { crop: usize, width: usize, height: usize },
    #[error("loss became non-finite at step {step}")]
    NonFinite { step: usize },
    #[error("empty: {0}")]
    Empty(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tile(#[from] TileError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Optimization settings. Defaults are sized for a CPU run on small tiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub crop_size: usize,
    pub max_steps: usize,
    pub base_lr: f64,
    pub weight_decay: f64,
    pub poly_power: f64,
    pub seed: u64,
    pub batch_size: usize,
    /// Set programmatically; the command line takes it from the dataset
    /// manifest.
    #[serde(skip)]
    pub weights: WeightVector,
    pub ignore_index: u8,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            crop_size: 64,
            max_steps: 300,
            base_lr: 4e-3,
            weight_decay: 0.01,
            poly_power: DEFAULT_POLY_POWER,
            seed: 0,
            batch_size: 8,
            weights: WeightVector::ign(),
            ignore_index: NODATA,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1".into());
        }
        if self.crop_size == 0 {
            return bad("crop_size must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return bad(format!("base_lr {} must be positive", self.base_lr));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!("weight_decay {} must be non-negative", self.weight_decay));
        }
        if !(self.poly_power.is_finite() && self.poly_power >= 0.0) {
            return bad(format!("poly_power {} must be non-negative", self.poly_power));
        }
        Ok(())
    }
}
