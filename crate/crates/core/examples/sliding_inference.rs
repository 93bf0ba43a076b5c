//! Segments the whole fixture orthophoto with overlapping windows, using a
//! checkpoint if one is given and a freshly initialized model otherwise.
//!
//! `cargo run --release --example sliding_inference -- [checkpoint] [window] [stride]`

use std::time::Instant;

use landseg::classes::CLASS_NAMES;
use landseg::fixture::{self, Fixture};
use landseg::swin::{checkpoint, SwinSegmenter};
use landseg::train::sliding_infer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let model = match args.next().filter(|a| a != "-") {
        Some(p) => checkpoint::load(p.as_ref())?,
        None => SwinSegmenter::init(fixture::model_config(), 0)?,
    };
    let window: usize = args.next().map_or(Ok(64), |s| s.parse())?;
    let stride: usize = args.next().map_or(Ok(window / 2), |s| s.parse())?;

    let fx = Fixture::generate(0)?;
    let t0 = Instant::now();
    let pred = sliding_infer(&model, &fx.ortho, window, stride)?;
    println!(
        "{}x{} px, window {window}, stride {stride}: {:.2}s",
        pred.grid.width,
        pred.grid.height,
        t0.elapsed().as_secs_f64()
    );
    for (k, name) in CLASS_NAMES.iter().enumerate() {
        println!("{name:<18} {:>6} px", pred.data.iter().filter(|&&v| v as usize == k).count());
    }
    Ok(())
}
