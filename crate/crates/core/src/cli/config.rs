use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Palette;
use crate::geovec::{ParseOptions, UnknownPolicy, DEFAULT_ROAD_WIDTH_M};
use crate::raster::GridSpec;
use crate::swin::SwinConfig;
use crate::tiler::{SplitSpec, WeightScheme, DEFAULT_MAX_NODATA, DEFAULT_TILE_PX};
use crate::train::TrainConfig;

/// File locations. Relative paths are resolved against the directory of the
/// config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// GeoJSON layers, painted in class-priority order regardless of list order.
    pub layers: Vec<PathBuf>,
    pub ortho: PathBuf,
    /// Tab-separated `source class<TAB>target id`; the built-in IGN mapping
    /// when absent.
    pub class_map: Option<PathBuf>,
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    /// Logs, reports and predictions.
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            layers: Vec::new(),
            ortho: "ortho.png".into(),
            class_map: None,
            dataset: "dataset".into(),
            checkpoint: "model.swseg".into(),
            output: "output".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VectorConfig {
    pub class_property: String,
    pub default_width_m: f64,
    /// `error` or `nodata`.
    pub unknown_class: String,
}

impl Default for VectorConfig {
    fn default() -> Self {
        Self {
            class_property: ParseOptions::default().class_property,
            default_width_m: DEFAULT_ROAD_WIDTH_M,
            unknown_class: "error".into(),
        }
    }
}

/// Georeference used when the orthophoto has no sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TilingConfig {
    pub tile_px: usize,
    pub max_nodata: f64,
    pub train_fraction: f64,
    pub split_seed: u64,
    /// `manual`, `manual:a,b,c,d,e,f`, `inverse_frequency` or `median_frequency`.
    pub weight_scheme: String,
}

impl Default for TilingConfig {
    fn default() -> Self {
        let split = SplitSpec::default();
        Self {
            tile_px: DEFAULT_TILE_PX,
            max_nodata: DEFAULT_MAX_NODATA,
            train_fraction: split.training,
            split_seed: split.seed,
            weight_scheme: "manual".into(),
        }
    }
}

/// Sliding-window settings; unset values follow the training crop.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferConfig {
    pub window: Option<usize>,
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub grid: Option<GridConfig>,
    pub vector: VectorConfig,
    pub tiling: TilingConfig,
    pub train: TrainConfig,
    pub model: SwinConfig,
    pub infer: InferConfig,
    pub palette: Palette,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.message().to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg = Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        p.layers.iter_mut().for_each(|l| resolve(base, l));
        for f in [&mut p.ortho, &mut p.dataset, &mut p.checkpoint, &mut p.output] {
            resolve(base, f);
        }
        if let Some(c) = p.class_map.as_mut() {
            resolve(base, c);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), String> {
        self.model.validate().map_err(|e| e.to_string())?;
        self.train.validate().map_err(|e| e.to_string())?;
        self.palette.validate().map_err(|e| e.to_string())?;
        self.unknown_policy()?;
        self.weight_scheme()?;
        let t = &self.tiling;
        if t.tile_px == 0 {
            return Err("tiling.tile_px must be positive".into());
        }
        if !(0.0..=1.0).contains(&t.max_nodata) {
            return Err(format!("tiling.max_nodata {} outside [0, 1]", t.max_nodata));
        }
        if !(0.0..=1.0).contains(&t.train_fraction) {
            return Err(format!("tiling.train_fraction {} outside [0, 1]", t.train_fraction));
        }
        if !(self.vector.default_width_m.is_finite() && self.vector.default_width_m > 0.0) {
            return Err("vector.default_width_m must be positive".into());
        }
        if let Some(g) = self.grid {
            GridSpec::new(g.origin_x, g.origin_y, g.pixel_size, 1, 1).map_err(|e| e.to_string())?;
        }
        let (w, s) = self.window_stride();
        if w == 0 || s == 0 || s > w {
            return Err(format!("infer stride {s} must be in 1..={w}"));
        }
        Ok(())
    }

    pub fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            class_property: self.vector.class_property.clone(),
            default_width_m: self.vector.default_width_m,
        }
    }

    pub fn unknown_policy(&self) -> Result<UnknownPolicy, String> {
        self.vector.unknown_class.parse()
    }

    pub fn weight_scheme(&self) -> Result<WeightScheme, String> {
        self.tiling.weight_scheme.parse()
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec::new(self.tiling.train_fraction, self.tiling.split_seed)
    }

    /// Defaults to the training crop with half-window stride.
    pub fn window_stride(&self) -> (usize, usize) {
        let w = self.infer.window.unwrap_or(self.train.crop_size);
        (w, self.infer.stride.unwrap_or((w / 2).max(1)))
    }

    pub fn grid_fallback(&self) -> Option<GridSpec> {
        self.grid
            .map(|g| GridSpec { origin_x: g.origin_x, origin_y: g.origin_y, pixel_size: g.pixel_size, width: 1, height: 1 })
    }
}
