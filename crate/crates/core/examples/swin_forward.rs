//! Runs the desk-scale segmenter on a random image and prints the feature
//! pyramid and logit shapes.
//!
//! `cargo run --release --example swin_forward -- [side]`

use std::time::Instant;

use landseg::autodiff::Tape;
use landseg::swin::{backbone_forward, upernet_head, ModelParams, SwinConfig};
use landseg::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let side: usize = std::env::args().nth(1).map_or(Ok(64), |s| s.parse())?;
    let cfg = SwinConfig::default();
    let params = ModelParams::<f32>::init(&cfg, 0)?;
    println!("{} parameter tensors, {} scalars", params.len(), params.num_scalars());

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let image = Tensor::from_fn(&[1, side, side, 3], |_| rng.gen_range(-2.0f32..2.0));
    let t0 = Instant::now();
    let mut tape = Tape::new();
    let x = tape.constant(image);
    let pyramid = backbone_forward(&mut tape, &params, &cfg, x)?;
    for (i, p) in pyramid.iter().enumerate() {
        println!("stage {i}: {:?}", tape.shape(*p));
    }
    let logits = upernet_head(&mut tape, &params, &cfg, &pyramid, (side, side))?;
    println!("logits: {:?} in {:.2}s", tape.shape(logits), t0.elapsed().as_secs_f64());
    Ok(())
}
