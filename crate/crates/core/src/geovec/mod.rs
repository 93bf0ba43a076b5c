//! Vector layers to label rasters: GeoJSON parsing, class merging, road
//! buffering and priority rasterization.

mod buffer;
mod classmap;
mod geojson;
mod geometry;
mod rasterize;

pub use buffer::buffer_polyline;
pub use classmap::{apply_class_map, ClassMap, UnknownPolicy};
pub use geojson::{
    parse_feature_collection, to_geojson, FeatureProblem, ParseOptions, DEFAULT_ROAD_WIDTH_M,
    WIDTH_ATTRIBUTE,
};
pub use geometry::{
    ring_area, ring_perimeter, ClassedFeature, Coord, Feature, FeatureCollection, Geometry,
    GeometryError, GeometryKind, Ring,
};
pub use rasterize::{fill_polygon, rasterize, DEFAULT_PRIORITY};

use crate::raster::RasterError;

#[derive(Debug, thiserror::Error)]
pub enum GeoError {
    #[error("malformed feature collection: {0}")]
    Malformed(String),
    #[error("feature {index}: {problem}")]
    Feature { index: usize, problem: FeatureProblem },
    #[error("unknown source class `{0}`")]
    UnknownClass(String),
    #[error("class map: {0}")]
    ClassMap(String),
    #[error("class priority: {0}")]
    Priority(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}
