//! Finite-difference check of every parameter of the tiny model.
//!
//! Runs in f64 with random parameters so every path carries signal.

use std::time::Instant;

use landseg::swin::gradcheck::gradient_check;
use landseg::swin::{ModelParams, SwinConfig};
use landseg::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SwinConfig::tiny();
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>());
    let scale = args.next().transpose()?.unwrap_or(0.4);
    let step = args.next().transpose()?.unwrap_or(1e-3);
    let params = ModelParams::<f64>::random(&config, 7, scale)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let images = Tensor::from_fn(&[1, 32, 32, 3], |_| rng.gen_range(-1.0..1.0));
    let weights = Tensor::from_fn(&[1, 32, 32, 6], |_| rng.gen_range(-1.0..1.0));

    let start = Instant::now();
    let report = gradient_check(&config, &params, &images, &weights, step)?;
    for p in &report.params {
        println!(
            "{:<60} {:>6}  max rel err {:.2e}  (analytic {:+.3e}, numeric {:+.3e})",
            p.name, p.count, p.max_rel_err, p.analytic, p.numeric
        );
    }
    println!(
        "checked {} scalars in {:.1}s, worst relative error {:.3e}",
        report.scalars_checked(),
        start.elapsed().as_secs_f64(),
        report.max_rel_err()
    );
    Ok(())
}
