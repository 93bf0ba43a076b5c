//! Saves a model to the `SWSEG1` checkpoint format and loads it back.
//!
//! `cargo run --example checkpoint -- [path]`

use std::path::PathBuf;

use landseg::swin::{checkpoint, SwinConfig, SwinSegmenter};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("tiny.swseg"), PathBuf::from);
    let model = SwinSegmenter::<f32>::init(SwinConfig::tiny(), 3)?;
    checkpoint::save(&model, &path)?;
    let size = std::fs::metadata(&path)?.len();
    let loaded = checkpoint::load(&path)?;
    println!("{}: {size} bytes, {} tensors", path.display(), loaded.params().len());
    println!("config and weights restored exactly: {}", loaded.config() == model.config() && loaded.params() == model.params());
    Ok(())
}
