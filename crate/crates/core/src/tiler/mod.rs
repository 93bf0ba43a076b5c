//! Cutting rasters into tiles, nodata filtering, class statistics and the
//! dataset directory writer.

mod dataset;
mod tiles;
mod weights;

use std::path::PathBuf;

pub use dataset::{write_dataset, Dataset, Manifest, ManifestEntry, Split, SplitSpec, MANIFEST_FILE};
pub use tiles::{cut_tiles, filter_tiles, tile_id_for, TileRecord, DEFAULT_MAX_NODATA, DEFAULT_TILE_PX};
pub use weights::{
    class_stats, compute_weights, ClassHistogram, WeightScheme, WeightVector, IGN_WEIGHTS,
};

use crate::raster::RasterError;

#[derive(Debug, thiserror::Error)]
pub enum TileError {
    #[error("raster mismatch: {0}")]
    Mismatch(String),
    #[error("raster {width}x{height} is smaller than one {tile_px}px tile")]
    TooSmall {
        width: usize,
        height: usize,
        tile_px: usize,
    },
    #[error("no tiles")]
    Empty,
    #[error("duplicate tile id `{0}`")]
    DuplicateId(String),
    #[error("split: {0}")]
    Split(String),
    #[error("weights: {0}")]
    Weights(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Raster(#[from] RasterError),
}
