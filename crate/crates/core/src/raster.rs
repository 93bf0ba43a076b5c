//! Georeferenced grids, label rasters and RGB rasters, plus their PNG and
//! sidecar I/O.
//!
//! Axis convention: row 0 is the northernmost row and the grid origin is the
//! top-left corner, so pixel `(row, col)` covers
//! `[origin_x + col·ps, origin_x + (col+1)·ps] × [origin_y − (row+1)·ps, origin_y − row·ps]`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::classes::NODATA;

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: expected {expected} image, found {found}")]
    Channels {
        path: PathBuf,
        expected: &'static str,
        found: String,
    },
    #[error("{path}: malformed georeference sidecar: {reason}")]
    Sidecar { path: PathBuf, reason: String },
    #[error("label value {value} at pixel {index} is not a class id or nodata")]
    BadLabel { value: u8, index: usize },
}

/// Placement of a pixel grid in a projected CRS (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub const DEFAULT_PIXEL_SIZE: f64 = 0.5;

    pub fn new(
        origin_x: f64,
        origin_y: f64,
        pixel_size: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, RasterError> {
        let g = Self {
            origin_x,
            origin_y,
            pixel_size,
            width,
            height,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), RasterError> {
        if !(self.pixel_size > 0.0 && self.pixel_size.is_finite()) {
            return Err(RasterError::Grid(format!(
                "pixel_size must be positive, got {}",
                self.pixel_size
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(RasterError::Grid(format!(
                "empty grid {}x{}",
                self.width, self.height
            )));
        }
        if !self.origin_x.is_finite() || !self.origin_y.is_finite() {
            return Err(RasterError::Grid("non-finite origin".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid of a `width × height` window whose top-left pixel is `(row, col)`.
    pub fn subgrid(&self, row: usize, col: usize, width: usize, height: usize) -> Self {
        Self {
            origin_x: self.origin_x + col as f64 * self.pixel_size,
            origin_y: self.origin_y - row as f64 * self.pixel_size,
            pixel_size: self.pixel_size,
            width,
            height,
        }
    }

    /// World coordinates → continuous pixel coordinates `(col, row)`.
    pub fn to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.origin_x) / self.pixel_size,
            (self.origin_y - y) / self.pixel_size,
        )
    }

    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.pixel_size,
            self.origin_y - (row as f64 + 0.5) * self.pixel_size,
        )
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Single-channel class-id grid; 255 marks nodata.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRaster {
    pub grid: GridSpec,
    pub data: Vec<u8>,
}

impl LabelRaster {
    pub fn filled(grid: GridSpec, value: u8) -> Self {
        Self {
            grid,
            data: vec![value; grid.len()],
        }
    }

    pub fn from_data(grid: GridSpec, data: Vec<u8>) -> Result<Self, RasterError> {
        if data.len() != grid.len() {
            return Err(RasterError::Grid(format!(
                "label data length {} does not match {}x{}",
                data.len(),
                grid.width,
                grid.height
            )));
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, &v)| v as usize >= crate::classes::NUM_CLASSES && v != NODATA)
        {
            return Err(RasterError::BadLabel { value, index });
        }
        Ok(Self { grid, data })
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.grid.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        self.data[row * self.grid.width + col] = v;
    }

    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Self {
        let w = self.grid.width;
        let mut data = Vec::with_capacity(width * height);
        for r in row..row + height {
            data.extend_from_slice(&self.data[r * w + col..r * w + col + width]);
        }
        Self {
            grid: self.grid.subgrid(row, col, width, height),
            data,
        }
    }

    pub fn nodata_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == NODATA).count()
    }

    /// Writes an 8-bit grayscale PNG of raw class ids plus its sidecar.
    pub fn save_georeferenced(&self, path: &Path) -> Result<(), RasterError> {
        self.save_png(path)?;
        write_sidecar(path, &self.grid)
    }

    /// Writes an 8-bit grayscale PNG of raw class ids.
    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        let img = image::GrayImage::from_raw(
            self.grid.width as u32,
            self.grid.height as u32,
            self.data.clone(),
        )
        .expect("buffer length matches grid");
        img.save(path).map_err(|source| RasterError::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads a label PNG. The georeference comes from the sidecar when one
    /// exists, otherwise from `fallback`'s origin and pixel size.
    pub fn load_png(path: &Path, fallback: Option<GridSpec>) -> Result<Self, RasterError> {
        let img = open_image(path)?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let gray = match img {
            image::DynamicImage::ImageLuma8(g) => g,
            other => {
                return Err(RasterError::Channels {
                    path: path.to_path_buf(),
                    expected: "8-bit single-channel",
                    found: format!("{:?}", other.color()),
                })
            }
        };
        let grid = resolve_grid(path, w, h, fallback)?;
        Self::from_data(grid, gray.into_raw())
    }
}

/// Interleaved 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbRaster {
    pub grid: GridSpec,
    pub data: Vec<u8>,
}

impl RgbRaster {
    pub fn filled(grid: GridSpec, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(grid.len() * 3);
        for _ in 0..grid.len() {
            data.extend_from_slice(&rgb);
        }
        Self { grid, data }
    }

    pub fn from_data(grid: GridSpec, data: Vec<u8>) -> Result<Self, RasterError> {
        if data.len() != grid.len() * 3 {
            return Err(RasterError::Grid(format!(
                "rgb data length {} does not match {}x{}x3",
                data.len(),
                grid.width,
                grid.height
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.grid.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = (row * self.grid.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Self {
        let w = self.grid.width;
        let mut data = Vec::with_capacity(width * height * 3);
        for r in row..row + height {
            data.extend_from_slice(&self.data[(r * w + col) * 3..(r * w + col + width) * 3]);
        }
        Self {
            grid: self.grid.subgrid(row, col, width, height),
            data,
        }
    }

    pub fn save_georeferenced(&self, path: &Path) -> Result<(), RasterError> {
        self.save_png(path)?;
        write_sidecar(path, &self.grid)
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        let img = image::RgbImage::from_raw(
            self.grid.width as u32,
            self.grid.height as u32,
            self.data.clone(),
        )
        .expect("buffer length matches grid");
        img.save(path).map_err(|source| RasterError::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load_png(path: &Path, fallback: Option<GridSpec>) -> Result<Self, RasterError> {
        let img = open_image(path)?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let rgb = match img {
            image::DynamicImage::ImageRgb8(i) => i,
            image::DynamicImage::ImageRgba8(_) | image::DynamicImage::ImageLuma8(_) => {
                img.to_rgb8()
            }
            other => {
                return Err(RasterError::Channels {
                    path: path.to_path_buf(),
                    expected: "8-bit RGB",
                    found: format!("{:?}", other.color()),
                })
            }
        };
        let grid = resolve_grid(path, w, h, fallback)?;
        Self::from_data(grid, rgb.into_raw())
    }
}

fn open_image(path: &Path) -> Result<image::DynamicImage, RasterError> {
    image::open(path).map_err(|source| RasterError::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn resolve_grid(
    path: &Path,
    width: usize,
    height: usize,
    fallback: Option<GridSpec>,
) -> Result<GridSpec, RasterError> {
    let side = sidecar_path(path);
    let (ox, oy, ps) = if side.exists() {
        read_sidecar(&side)?
    } else if let Some(g) = fallback {
        (g.origin_x, g.origin_y, g.pixel_size)
    } else {
        (0.0, 0.0, GridSpec::DEFAULT_PIXEL_SIZE)
    };
    GridSpec::new(ox, oy, ps, width, height)
}

/// `foo/bar.png` → `foo/bar.geo`.
pub fn sidecar_path(image: &Path) -> PathBuf {
    image.with_extension("geo")
}

/// Writes the one-line `origin_x origin_y pixel_size` sidecar next to `image`.
pub fn write_sidecar(image: &Path, grid: &GridSpec) -> Result<(), RasterError> {
    let side = sidecar_path(image);
    let text = format!("{} {} {}\n", grid.origin_x, grid.origin_y, grid.pixel_size);
    fs::write(&side, text).map_err(|source| RasterError::Io { path: side, source })
}

pub fn read_sidecar(path: &Path) -> Result<(f64, f64, f64), RasterError> {
    let text = fs::read_to_string(path).map_err(|source| RasterError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |reason: &str| RasterError::Sidecar {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| bad(&format!("not a number: {t}"))))
        .collect::<Result<_, _>>()?;
    match vals[..] {
        [x, y, ps] if x.is_finite() && y.is_finite() && ps > 0.0 => Ok((x, y, ps)),
        [_, _, _] => Err(bad("non-finite origin or non-positive pixel size")),
        _ => Err(bad("expected `origin_x origin_y pixel_size`")),
    }
}
