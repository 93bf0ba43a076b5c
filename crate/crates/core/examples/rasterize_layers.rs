//! Parses the fixture's GeoJSON layers, merges source classes and burns
//! them into a label raster with the default priority.
//!
//! `cargo run --example rasterize_layers -- [out_dir]`

use std::path::PathBuf;

use landseg::classes::{ClassId, NODATA};
use landseg::fixture::Fixture;
use landseg::geovec::{apply_class_map, parse_feature_collection, rasterize, ClassMap, ParseOptions, UnknownPolicy, DEFAULT_PRIORITY};
use landseg::raster::RgbRaster;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("landseg_rasterize"), PathBuf::from);
    let files = Fixture::generate(0)?.write(&out)?;

    let opts = ParseOptions::default();
    let mut features = Vec::new();
    for path in &files.layers {
        let fc = parse_feature_collection(&std::fs::read(path)?, &opts)?;
        println!("{}: {} features", path.display(), fc.len());
        features.extend(fc);
    }
    let map = ClassMap::parse(&std::fs::read_to_string(&files.class_map)?, UnknownPolicy::Error)?;
    let classed = apply_class_map(&features, &map)?;
    let grid = RgbRaster::load_png(&files.ortho, None)?.grid;
    let labels = rasterize(&classed, &grid, &DEFAULT_PRIORITY)?;

    for class in ClassId::ALL {
        let n = labels.data.iter().filter(|&&v| v == class.value()).count();
        println!("{:<18} {n:>6} px", class.name());
    }
    println!("{:<18} {:>6} px", "nodata", labels.data.iter().filter(|&&v| v == NODATA).count());
    let path = out.join("labels.png");
    labels.save_georeferenced(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
