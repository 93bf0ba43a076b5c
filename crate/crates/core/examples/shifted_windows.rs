//! Shows which tokens may attend to each other after a half-window roll of
//! an 8×8 map with 4×4 windows.
//!
//! `cargo run --example shifted_windows`

use landseg::swin::{cyclic_shift, shift_attention_mask, window_partition};
use landseg::tensor::Tensor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (size, m) = (8, 4);
    // each token carries its original row-major position
    let x = Tensor::<f32>::from_fn(&[size, size, 1], |i| i as f32);
    let windows = window_partition(&cyclic_shift(&x, (m / 2) as isize)?, m)?;
    let mask = shift_attention_mask::<f32>(size, size, m, m / 2)?;
    let n = m * m;
    for w in 0..windows.shape()[0] {
        let ids: Vec<usize> = (0..n).map(|t| windows.get(&[w, t, 0]) as usize).collect();
        println!("window {w}: original positions {ids:?}");
        for i in 0..n {
            let row: String = (0..n).map(|j| if mask.get(&[w, i, j]) == 0.0 { '#' } else { '.' }).collect();
            println!("  {:>2} {row}", ids[i]);
        }
    }
    Ok(())
}
