use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::classes::NUM_CLASSES;

/// Architecture hyperparameters for the backbone and decode head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwinConfig {
    pub patch_size: usize,
    pub window_size: usize,
    pub embed_dim: usize,
    pub depths: [usize; 4],
    pub num_heads: [usize; 4],
    pub mlp_ratio: usize,
    pub num_classes: usize,
    /// Channel width of every decode-head convolution.
    pub decoder_channels: usize,
    pub pool_scales: Vec<usize>,
}

impl Default for SwinConfig {
    /// The desk-scale configuration: C=32, depths (2,2,2,2), M=4.
    fn default() -> Self {
        Self {
            patch_size: 4,
            window_size: 4,
            embed_dim: 32,
            depths: [2, 2, 2, 2],
            num_heads: [1, 2, 4, 8],
            mlp_ratio: 4,
            num_classes: NUM_CLASSES,
            decoder_channels: 32,
            pool_scales: vec![1, 2, 3, 6],
        }
    }
}

impl SwinConfig {
    /// Smallest useful model (C=8, one block per stage, 8-wide decoder);
    /// used for gradient checks.
    pub fn tiny() -> Self {
        Self {
            embed_dim: 8,
            depths: [1, 1, 1, 1],
            decoder_channels: 8,
            ..Self::default()
        }
    }

    /// Swin-L with a 12×12 window and a 512-wide decoder. Reachable through
    /// configuration; far too heavy for CPU training.
    pub fn large_window12() -> Self {
        Self {
            window_size: 12,
            embed_dim: 192,
            depths: [2, 2, 18, 2],
            num_heads: [6, 12, 24, 48],
            decoder_channels: 512,
            ..Self::default()
        }
    }

    /// Channel width of stage `s`.
    pub fn stage_dim(&self, s: usize) -> usize {
        self.embed_dim << s
    }

    /// Input sides must be multiples of this (patch size × three merges).
    pub fn stride(&self) -> usize {
        self.patch_size * 8
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.patch_size == 0 {
            return bad("patch_size must be positive".into());
        }
        if self.window_size < 2 {
            return bad(format!("window_size {} must be at least 2", self.window_size));
        }
        if self.embed_dim == 0 || self.mlp_ratio == 0 || self.decoder_channels == 0 {
            return bad("embed_dim, mlp_ratio and decoder_channels must be positive".into());
        }
        if self.num_classes != NUM_CLASSES {
            return bad(format!("num_classes must be {NUM_CLASSES}, got {}", self.num_classes));
        }
        if self.pool_scales.is_empty() || self.pool_scales.contains(&0) {
            return bad("pool_scales must be non-empty and positive".into());
        }
        for s in 0..4 {
            let (d, h) = (self.depths[s], self.num_heads[s]);
            if d == 0 {
                return bad(format!("stage {s} has depth 0"));
            }
            if h == 0 || !self.stage_dim(s).is_multiple_of(h) {
                return bad(format!(
                    "stage {s}: {h} heads do not divide {} channels",
                    self.stage_dim(s)
                ));
            }
        }
        Ok(())
    }
}
