use rayon::prelude::*;

use super::TileError;
use crate::raster::{GridSpec, LabelRaster, RgbRaster};

pub const DEFAULT_TILE_PX: usize = 1000;

/// Tiles whose nodata fraction exceeds this are dropped.
pub const DEFAULT_MAX_NODATA: f64 = 0.5;

/// A paired image/label tile.
#[derive(Debug, Clone, PartialEq)]
pub struct TileRecord {
    pub tile_id: String,
    pub image: RgbRaster,
    pub labels: LabelRaster,
    pub nodata_fraction: f64,
}

impl TileRecord {
    /// Builds a record and computes its nodata fraction.
    pub fn new(tile_id: String, image: RgbRaster, labels: LabelRaster) -> Result<Self, TileError> {
        if !image.grid.same_shape(&labels.grid) {
            return Err(TileError::Mismatch(format!(
                "image {}x{} vs labels {}x{}",
                image.grid.width, image.grid.height, labels.grid.width, labels.grid.height
            )));
        }
        let nodata_fraction = labels.nodata_count() as f64 / labels.data.len() as f64;
        Ok(Self {
            tile_id,
            image,
            labels,
            nodata_fraction,
        })
    }

    pub fn georef(&self) -> &GridSpec {
        &self.labels.grid
    }
}

/// Formats a coordinate in kilometers as a zero-padded integer, keeping any
/// sub-kilometer remainder as a decimal suffix (`935500.0` → `0935.5`).
fn km_label(meters: f64) -> String {
    let km = (meters / 1000.0).floor();
    let rem = meters - km * 1000.0;
    let mut s = format!("{:04}", km as i64);
    if rem.abs() > 1e-9 {
        let frac = format!("{}", rem / 1000.0);
        s.push_str(frac.trim_start_matches('0'));
    }
    s
}

/// `<x_km>_<y_km>` of the tile's top-left corner.
pub fn tile_id_for(grid: &GridSpec) -> String {
    format!("{}_{}", km_label(grid.origin_x), km_label(grid.origin_y))
}

/// Cuts aligned rasters into non-overlapping `tile_px` squares, row-major from
/// the top-left. Partial tiles at the right and bottom edges are dropped.
pub fn cut_tiles(
    image: &RgbRaster,
    labels: &LabelRaster,
    tile_px: usize,
) -> Result<Vec<TileRecord>, TileError> {
    if image.grid != labels.grid {
        return Err(TileError::Mismatch(format!(
            "image grid {:?} vs label grid {:?}",
            image.grid, labels.grid
        )));
    }
    let g = labels.grid;
    if tile_px == 0 || g.width < tile_px || g.height < tile_px {
        return Err(TileError::TooSmall {
            width: g.width,
            height: g.height,
            tile_px,
        });
    }
    let (nx, ny) = (g.width / tile_px, g.height / tile_px);
    (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let (row, col) = ((k / nx) * tile_px, (k % nx) * tile_px);
            let lab = labels.crop(row, col, tile_px, tile_px);
            let img = image.crop(row, col, tile_px, tile_px);
            TileRecord::new(tile_id_for(&lab.grid), img, lab)
        })
        .collect()
}

/// Keeps tiles whose nodata fraction is at most `max_nodata`, in order.
///
/// Panics if `max_nodata` is outside `[0, 1]`.
pub fn filter_tiles(tiles: Vec<TileRecord>, max_nodata: f64) -> Vec<TileRecord> {
    assert!(
        (0.0..=1.0).contains(&max_nodata),
        "max_nodata must lie in [0, 1], got {max_nodata}"
    );
    tiles
        .into_iter()
        .filter(|t| t.nodata_fraction <= max_nodata)
        .collect()
}
