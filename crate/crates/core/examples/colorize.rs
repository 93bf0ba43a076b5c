//! Renders the fixture labels with the default palette and checks that the
//! colors decode back to the same class ids.
//!
//! `cargo run --example colorize -- [out_dir]`

use std::path::PathBuf;

use landseg::cli::Palette;
use landseg::fixture::Fixture;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("landseg_colorize"), PathBuf::from);
    std::fs::create_dir_all(&out)?;
    let fx = Fixture::generate(0)?;
    let palette = Palette::default();
    let rgb = palette.colorize(&fx.labels);
    let path = out.join("labels_rgb.png");
    rgb.save_png(&path)?;
    fx.ortho.save_png(&out.join("ortho.png"))?;
    let back = palette.decolorize(&rgb)?;
    println!("wrote {} and ortho.png", path.display());
    println!("decoded labels identical: {}", back.data == fx.labels.data);
    Ok(())
}
