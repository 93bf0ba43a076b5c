//! Class histogram of the fixture tiles and the weights each scheme derives
//! from it.
//!
//! `cargo run --example class_weights`

use landseg::classes::CLASS_NAMES;
use landseg::fixture::Fixture;
use landseg::tiler::{class_stats, compute_weights, WeightScheme};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tiles = Fixture::generate(0)?.tiles();
    let hist = class_stats(&tiles)?;
    let freq = hist.frequencies();
    for (k, name) in CLASS_NAMES.iter().enumerate() {
        println!("{name:<18} {:>6} px  {:.3}", hist.counts[k], freq[k]);
    }
    for scheme in ["manual", "inverse_frequency", "median_frequency"] {
        let w = compute_weights(&hist, scheme.parse::<WeightScheme>()?)?;
        println!("{scheme:<18} {w}");
    }
    Ok(())
}
