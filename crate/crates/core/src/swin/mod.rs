//! Shifted-window transformer backbone with a UPerNet decode head.
//!
//! The model is small enough to train on a CPU at the default configuration
//! and is written against the [`Tape`](crate::autodiff::Tape), so it runs in
//! `f32` for training and `f64` for gradient checking.

pub mod checkpoint;
pub mod gradcheck;
mod config;
pub mod index;
pub mod layers;
mod model;
mod params;

use std::path::PathBuf;

pub use config::SwinConfig;
pub use index::{cyclic_shift, relative_position_index, shift_attention_mask, window_partition, window_reverse};
pub use layers::{patch_embed, patch_merging, swin_block, window_attention, Attention};
pub use model::{backbone_forward, upernet_head, ForwardPass, SwinSegmenter};
pub use params::{param_specs, Init, ModelParams, ParamSpec, INIT_STD};

use crate::autodiff::AutodiffError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("shape: {0}")]
    Shape(String),
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}
