//! Cuts the fixture into tiles, drops tiles with more than half nodata and
//! writes the training/validation tree.
//!
//! `cargo run --example build_dataset -- [out_dir]`

use std::path::PathBuf;

use landseg::fixture::{self, Fixture, FIXTURE_TILE_PX};
use landseg::tiler::{cut_tiles, filter_tiles, write_dataset, WeightVector, DEFAULT_MAX_NODATA};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("landseg_dataset"), PathBuf::from);
    let fx = Fixture::generate(0)?;
    let all = cut_tiles(&fx.ortho, &fx.labels, FIXTURE_TILE_PX)?;
    for t in &all {
        println!("{:<20} nodata {:5.1}%", t.tile_id, 100.0 * t.nodata_fraction);
    }
    let kept = filter_tiles(all, DEFAULT_MAX_NODATA);
    let manifest = write_dataset(&kept, fixture::split(), &root, WeightVector::ign())?;
    println!("kept {} tiles", kept.len());
    for p in manifest.paths() {
        println!("  {}", p.display());
    }
    println!("manifest at {}", root.join("manifest.tsv").display());
    Ok(())
}
