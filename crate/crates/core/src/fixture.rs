//! A small synthetic scene standing in for the IGN layers, which cannot be
//! redistributed.
//!
//! The scene is a 192×128 px grid at 0.5 m (six 64 px tiles). Three vector
//! layers (forest, buildings, roads) are rasterized with the normal pipeline,
//! and the orthophoto is synthesized from the resulting labels: each class has
//! its own base color plus bounded noise, so the image is separable by
//! construction. The bottom-right tile is only 37.5% covered and is dropped
//! by the nodata filter.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classes::{ClassId, NODATA, NUM_CLASSES};
use crate::geovec::{
    apply_class_map, rasterize, to_geojson, ClassMap, Feature, FeatureCollection, GeoError, Geometry,
    ParseOptions, DEFAULT_PRIORITY,
};
use crate::raster::{GridSpec, LabelRaster, RasterError, RgbRaster};
use crate::swin::SwinConfig;
use crate::tiler::{cut_tiles, filter_tiles, Split, SplitSpec, TileRecord, DEFAULT_MAX_NODATA};

pub const FIXTURE_TILE_PX: usize = 64;
pub const FIXTURE_WIDTH: usize = 192;
pub const FIXTURE_HEIGHT: usize = 128;
pub const FIXTURE_ORIGIN: (f64, f64) = (935_000.0, 6_390_000.0);

/// Mean orthophoto color of each class.
pub const CLASS_COLORS: [[u8; 3]; NUM_CLASSES] = [
    [30, 70, 35],
    [90, 140, 60],
    [150, 105, 60],
    [190, 200, 90],
    [200, 60, 60],
    [110, 110, 120],
];
/// Orthophoto color of areas no layer covers.
pub const UNCOVERED_COLOR: [u8; 3] = [235, 225, 205];
/// Per-channel noise amplitude added to every pixel.
pub const NOISE: u8 = 12;

/// The tiny backbone (C=8, one block per stage, M=4) with a 32-wide decoder,
/// which converges on the fixture far faster than the 8-wide one.
pub fn model_config() -> SwinConfig {
    SwinConfig {
        decoder_channels: 32,
        ..SwinConfig::tiny()
    }
}

/// 80/20 split with seed 0.
pub fn split() -> SplitSpec {
    SplitSpec::new(0.8, 0)
}

/// Training settings for the overfit run on the fixture.
pub fn train_config() -> crate::train::TrainConfig {
    crate::train::TrainConfig {
        crop_size: FIXTURE_TILE_PX,
        max_steps: 300,
        ..Default::default()
    }
}

pub const FOREST_LAYER: &str = "foret.geojson";
pub const BUILDING_LAYER: &str = "batiment.geojson";
pub const ROAD_LAYER: &str = "route.geojson";

pub struct Fixture {
    pub grid: GridSpec,
    /// `(file name, features)` for each vector layer.
    pub layers: Vec<(String, FeatureCollection)>,
    pub class_map: ClassMap,
    pub labels: LabelRaster,
    pub ortho: RgbRaster,
}

/// Paths written by [`Fixture::write`].
#[derive(Debug, Clone)]
pub struct FixtureFiles {
    pub layers: Vec<PathBuf>,
    pub class_map: PathBuf,
    pub ortho: PathBuf,
}

fn grid() -> GridSpec {
    GridSpec::new(FIXTURE_ORIGIN.0, FIXTURE_ORIGIN.1, 0.5, FIXTURE_WIDTH, FIXTURE_HEIGHT).expect("fixture grid")
}

/// Ring along pixel edges: rows `r0..r1`, columns `c0..c1`.
fn px_ring(g: &GridSpec, r0: usize, c0: usize, r1: usize, c1: usize) -> Vec<[f64; 2]> {
    let x = |c: usize| g.origin_x + c as f64 * g.pixel_size;
    let y = |r: usize| g.origin_y - r as f64 * g.pixel_size;
    vec![
        [x(c0), y(r0)],
        [x(c0), y(r1)],
        [x(c1), y(r1)],
        [x(c1), y(r0)],
        [x(c0), y(r0)],
    ]
}

fn feature(geometry: Geometry, class: &str) -> Feature {
    Feature {
        geometry,
        source_class: class.to_string(),
        attributes: Default::default(),
    }
}

const DENSE: &str = "Forêt fermée de feuillus";
const SPARSE: &str = "Forêt ouverte de conifères";
const MOOR: &str = "Lande";
const HERB: &str = "Formation herbacée";

fn forest_layer(g: &GridSpec) -> FeatureCollection {
    let rect = |r0, c0, r1, c1| Geometry::Polygon(vec![px_ring(g, r0, c0, r1, c1)]);
    vec![
        feature(rect(0, 0, 64, 64), DENSE),
        feature(rect(0, 64, 64, 128), SPARSE),
        // Moor patch with a sparse-forest clearing inside it.
        feature(
            Geometry::Polygon(vec![px_ring(g, 36, 68, 64, 112), px_ring(g, 44, 84, 56, 96)]),
            MOOR,
        ),
        feature(rect(0, 128, 64, 192), MOOR),
        feature(rect(4, 140, 24, 184), HERB),
        // Herbaceous background with a hole where dense forest sits.
        feature(
            Geometry::Polygon(vec![px_ring(g, 64, 0, 128, 64), px_ring(g, 72, 8, 100, 36)]),
            HERB,
        ),
        feature(rect(72, 8, 100, 36), DENSE),
        feature(rect(64, 64, 128, 128), DENSE),
        feature(rect(96, 92, 124, 124), SPARSE),
        // Only a strip of the last tile is mapped.
        feature(rect(64, 128, 128, 152), HERB),
    ]
}

fn building_layer(g: &GridSpec) -> FeatureCollection {
    vec![
        feature(
            Geometry::MultiPolygon(vec![vec![px_ring(g, 8, 8, 24, 28)], vec![px_ring(g, 44, 36, 56, 56)]]),
            "batiment",
        ),
        feature(Geometry::Polygon(vec![px_ring(g, 40, 160, 52, 180)]), "batiment"),
        feature(Geometry::Polygon(vec![px_ring(g, 104, 40, 120, 60)]), "batiment"),
        feature(Geometry::Polygon(vec![px_ring(g, 76, 100, 88, 120)]), "batiment"),
    ]
}

fn road_layer(g: &GridSpec) -> FeatureCollection {
    let x = |c: f64| g.origin_x + c * g.pixel_size;
    let y = |r: f64| g.origin_y - r * g.pixel_size;
    vec![
        // East-west road centered on the row-32 pixel edge, 8 px wide.
        feature(
            Geometry::Polyline {
                path: vec![[x(-2.0), y(32.0)], [x(194.0), y(32.0)]],
                width_m: 4.0,
            },
            "troncon_de_route",
        ),
        // North-south road through the lower middle tile.
        feature(
            Geometry::Polyline {
                path: vec![[x(76.0), y(62.0)], [x(76.0), y(130.0)]],
                width_m: 4.0,
            },
            "troncon_de_route",
        ),
    ]
}

/// Synthesizes an RGB image from labels: class color plus `±NOISE` per
/// channel drawn from a seeded stream.
pub fn synthesize_ortho(labels: &LabelRaster, seed: u64) -> RgbRaster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(labels.data.len() * 3);
    for &l in &labels.data {
        let base = if l == NODATA { UNCOVERED_COLOR } else { CLASS_COLORS[l as usize] };
        for b in base {
            let n: i16 = rng.gen_range(-(NOISE as i16)..=NOISE as i16);
            data.push((b as i16 + n).clamp(0, 255) as u8);
        }
    }
    RgbRaster::from_data(labels.grid, data).expect("ortho shape")
}

impl Fixture {
    /// Builds the scene; `seed` only affects the orthophoto noise.
    pub fn generate(seed: u64) -> Result<Self, GeoError> {
        let g = grid();
        let layers = vec![
            (FOREST_LAYER.to_string(), forest_layer(&g)),
            (BUILDING_LAYER.to_string(), building_layer(&g)),
            (ROAD_LAYER.to_string(), road_layer(&g)),
        ];
        let class_map = ClassMap::illustrative_default();
        let all: Vec<Feature> = layers.iter().flat_map(|(_, fc)| fc.iter().cloned()).collect();
        let classed = apply_class_map(&all, &class_map)?;
        let labels = rasterize(&classed, &g, &DEFAULT_PRIORITY)?;
        let ortho = synthesize_ortho(&labels, seed);
        Ok(Self {
            grid: g,
            layers,
            class_map,
            labels,
            ortho,
        })
    }

    /// Writes the layers as GeoJSON, the class map as TSV and the
    /// orthophoto as a georeferenced PNG into `dir`.
    pub fn write(&self, dir: &Path) -> Result<FixtureFiles, RasterError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| RasterError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let opts = ParseOptions::default();
        let mut layers = Vec::new();
        for (name, fc) in &self.layers {
            let p = dir.join(name);
            std::fs::write(&p, to_geojson(fc, &opts)).map_err(io(&p))?;
            layers.push(p);
        }
        let class_map = dir.join("classmap.tsv");
        std::fs::write(&class_map, self.class_map.to_text()).map_err(io(&class_map))?;
        let ortho = dir.join("ortho.png");
        self.ortho.save_georeferenced(&ortho)?;
        Ok(FixtureFiles {
            layers,
            class_map,
            ortho,
        })
    }

    /// The 64 px tiles that survive the default nodata filter.
    pub fn tiles(&self) -> Vec<TileRecord> {
        let all = cut_tiles(&self.ortho, &self.labels, FIXTURE_TILE_PX).expect("fixture tiles");
        filter_tiles(all, DEFAULT_MAX_NODATA)
    }

    /// The tiles [`split`] assigns to training (four of the five).
    pub fn training_tiles(&self) -> Vec<TileRecord> {
        let tiles = self.tiles();
        let assign = split().assign(tiles.len());
        tiles
            .into_iter()
            .zip(assign)
            .filter(|(_, s)| *s == Split::Training)
            .map(|(t, _)| t)
            .collect()
    }

    pub fn class_present(&self, class: ClassId) -> bool {
        self.labels.data.contains(&class.value())
    }
}
