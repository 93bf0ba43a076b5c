//! Scores a corrupted copy of the fixture labels against the originals:
//! per-class IoU, mIoU and the confusion matrix.
//!
//! `cargo run --example evaluate -- [flip_probability]`

use landseg::classes::{NODATA, NUM_CLASSES};
use landseg::fixture::Fixture;
use landseg::train::ConfusionMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p: f64 = std::env::args().nth(1).map_or(Ok(0.1), |s| s.parse())?;
    let truth = Fixture::generate(0)?.labels;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pred: Vec<u8> = truth
        .data
        .iter()
        .map(|&t| if t == NODATA || rng.gen_bool(p) { rng.gen_range(0..NUM_CLASSES as u8) } else { t })
        .collect();
    let mut cm = ConfusionMatrix::default();
    cm.add(&truth.data, &pred, NODATA)?;
    println!("{} scored pixels, {:.0}% relabelled at random\n", cm.total(), 100.0 * p);
    print!("{}\n{}", cm.report(), cm.to_csv());
    Ok(())
}
